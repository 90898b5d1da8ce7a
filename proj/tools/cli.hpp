#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etcpn/net.hpp"
#include "etcpn/observer.hpp"
#include "etcpn/simulator.hpp"

namespace etcpn::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kNumericError = 3, kInfeasible = 4 };

/// Bad command-line input or unreadable/unwritable files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const;
  /// Index of a column, or -1.
  long find(std::string_view name) const;
  /// Numeric column; empty cells become NaN. Throws InputError for unknown names.
  std::vector<double> column(std::string_view name) const;
};

Table parse_csv(std::string_view text);

/// Trajectory table with the columns
///   k, mode_true, mode_est, u, x1.., x1_hat.., y, y_hat, r_x1.., r_y, r_psi,
///   fault_active, alarm_ocsvm, alarm_svdd, alarm_ee
/// (u, y, y_hat and r_y get numbered suffixes when p or r exceed 1).
/// Observer columns are left empty without residuals, alarm columns without alarms.
Table trajectory_table(const HybridModel& model, const std::vector<long>& mode_ids,
                       const Trajectory& traj, const ResidualTrace* residuals = nullptr,
                       const std::vector<std::vector<bool>>* alarms = nullptr);

struct GainEntry {
  long mode = 0;
  Eigen::MatrixXd L;
};

/// Lines `gains <mode id> L = [..]`; blank lines and `#` comments are skipped.
std::vector<GainEntry> parse_gains(std::string_view text);
std::string format_gains(const std::vector<GainEntry>& gains);

/// Seed from ETCPN_SEED, if set. Throws InputError when it is not an unsigned integer.
std::optional<std::uint64_t> seed_from_env();

/// Runs one command line; everything is written to `out` / `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace etcpn::cli
