#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etcpn/detectors.hpp"
#include "etcpn/net.hpp"
#include "etcpn/signals.hpp"

/// Line-oriented text format for switched ETCPN models (`.etcpn` files).
///
///     # comment
///     name benchmark_two_mode
///     dims n=2 p=1 r=1 mf=1 modes=2
///     mode 1
///       A = [cos(pi/3), sin(pi/3); -sin(pi/3), cos(pi/3)]
///       B = [1; 0]
///       C = [0, 1]
///       Fy = [1]
///     end
///     guard 1 -> 2 when x1 > 0
///     initial_mode 1
///     initial_state [0; 0]
///     input step amplitude=1 at=0 width=1
///     fault sensor 5..10 25..30 magnitude=[0.5]
///     fault block 13..17 mode=1
///     gains 1 L = [0.866; 0.5]
///     detector ocsvm nu=0.12 gamma=scale
///
/// Matrix entries accept constant expressions over numbers, `pi`, + - * /,
/// parentheses, `cos` and `sin`.
namespace etcpn::dsl {

struct Diagnostic {
  int line = 0;
  int column = 0;
  std::string message;
};

struct Dimensions {
  Index n = 0, p = 0, r = 0, mf = 0, modes = 0;
  bool operator==(const Dimensions&) const = default;
};

struct ModeBlock {
  long id = 0;
  Eigen::MatrixXd A, B, C, Fx, Fy;
};

struct GuardDecl {
  long from = 0;
  long to = 0;
  Index component = 0;  // 0-based
  Comparator cmp = Comparator::Greater;
  double threshold = 0.0;
  bool operator==(const GuardDecl&) const = default;
};

struct FaultDecl {
  FaultKind kind = FaultKind::SensorAdditive;
  std::vector<StepInterval> intervals;
  Eigen::VectorXd magnitude;  // empty: simulator default
  long mode = 0;              // ModeBlocking only (mode id)
};

struct GainDecl {
  long mode = 0;
  Eigen::MatrixXd L;
};

using etcpn::DetectorKind;

struct DetectorDecl {
  DetectorKind kind = DetectorKind::OcSvm;
  std::optional<double> nu;
  std::optional<double> gamma;  // empty: "scale" rule
  std::optional<double> contamination;
  bool operator==(const DetectorDecl&) const = default;
};

struct ModelDocument {
  std::string name;
  Dimensions dims;
  std::vector<ModeBlock> modes;
  std::vector<GuardDecl> guards;
  long initial_mode = 0;
  Eigen::VectorXd initial_state;
  std::optional<InputSignal> input;
  std::vector<FaultDecl> faults;
  std::vector<GainDecl> gains;
  std::vector<DetectorDecl> detectors;

  /// 0-based position of a mode id, or -1.
  Index mode_index(long id) const;
};

bool operator==(const ModelDocument& a, const ModelDocument& b);

struct ParseResult {
  std::optional<ModelDocument> document;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return document.has_value(); }
  std::string message() const;
};

/// Parses and validates. Never throws; any problem becomes a positioned diagnostic.
ParseResult parse(std::string_view text);

/// Canonical text; numbers carry 17 significant digits.
std::string serialize(const ModelDocument& doc);

/// Evaluates a constant expression such as "-sin(2*pi/3)".
std::optional<double> evaluate_expression(std::string_view text);

/// Matrix literal "[a, b; c, d]" in the same number format as serialize().
std::string format_matrix(const Eigen::MatrixXd& m);
std::optional<Eigen::MatrixXd> parse_matrix(std::string_view text);

/// Switched model built from the document (mode ids mapped to declaration order).
HybridModel to_hybrid_model(const ModelDocument& doc, OutputPlaces outputs = OutputPlaces::Exclude);

/// Fault schedule with mode ids mapped to mode indices.
std::vector<FaultSpec> to_fault_specs(const ModelDocument& doc);

/// Reads a file and parses it; I/O failures become a diagnostic at 0:0.
ParseResult parse_file(const std::string& path);

}  // namespace etcpn::dsl
