#pragma once

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "etcpn/errors.hpp"

namespace etcpn {

using Index = Eigen::Index;

enum class NodeKind { Discrete, Continuous };

struct Place {
  std::string id;
  NodeKind kind = NodeKind::Continuous;
};

struct Transition {
  std::string id;
  NodeKind kind = NodeKind::Continuous;
  // Fixed firing delay of a discrete transition. Stored, not used by the sampled semantics.
  double delay = 0.0;
  // Maximum firing speed V_j of a continuous transition.
  double max_speed = std::numeric_limits<double>::infinity();
};

/// Joint marking at step k. Discrete entries are ordered like the discrete
/// places of the net, continuous entries like the continuous places.
struct Marking {
  Eigen::VectorXi discrete;
  Eigen::VectorXd continuous;
  long step = 0;
};

/// Places, transitions and arc weights of an ETCPN. `pre` and `post` are
/// |P| x |T| over the full node lists; the discrete/continuous partition is
/// read from the node kinds.
struct NetStructure {
  std::vector<Place> places;
  std::vector<Transition> transitions;
  Eigen::MatrixXd pre;
  Eigen::MatrixXd post;
  Marking initial;

  std::vector<Index> place_indices(NodeKind kind) const;
  std::vector<Index> transition_indices(NodeKind kind) const;

  /// Sub-block of `m` restricted to the given place and transition kinds.
  Eigen::MatrixXd block(const Eigen::MatrixXd& m, NodeKind place_kind,
                        NodeKind transition_kind) const;

  /// Throws DimensionError / ModelError / CouplingError on malformed nets.
  void validate() const;
};

/// W^D and the per-mode W^C_q blocks of Post - Pre.
struct IncidenceBlocks {
  Eigen::MatrixXi wD;
  std::vector<Eigen::MatrixXd> wC;
  // Discrete place (index into the discrete places) gating each W^C_q.
  std::vector<Index> mode_places;
};

/// Splits Post - Pre into its discrete block and one continuous block per
/// mode. Continuous transitions are grouped by the discrete place that
/// test-arcs them; a net without test arcs yields a single block.
IncidenceBlocks incidence(const NetStructure& net);

/// [[I_p, 0], [B, A]] - I_f for the input/state place layout [u; x].
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> build_wc(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B) {
  using Scalar = typename DerivedA::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = A.rows();
  const Index p = B.cols();
  if (A.cols() != n || B.rows() != n) throw DimensionError("build_wc: A must be n x n and B n x p");
  const Index f = p + n;
  Mat post = Mat::Zero(f, f);
  post.topLeftCorner(p, p).setIdentity();
  post.bottomLeftCorner(n, p) = B;
  post.bottomRightCorner(n, n) = A;
  return post - Mat::Identity(f, f);
}

/// [[I_p, 0, 0], [B, A, 0], [CB, CA, 0]] - I_f for the layout [u; x; y].
template <typename DerivedA, typename DerivedB, typename DerivedC>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> build_wc_with_output(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
    const Eigen::MatrixBase<DerivedC>& C) {
  using Scalar = typename DerivedA::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = A.rows();
  const Index p = B.cols();
  const Index r = C.rows();
  if (A.cols() != n || B.rows() != n || C.cols() != n)
    throw DimensionError("build_wc_with_output: expected A n x n, B n x p, C r x n");
  const Index f = p + n + r;
  Mat post = Mat::Zero(f, f);
  post.topLeftCorner(p, p).setIdentity();
  post.block(p, 0, n, p) = B;
  post.block(p, p, n, n) = A;
  post.block(p + n, 0, r, p) = C * B;
  post.block(p + n, p, r, n) = C * A;
  return post - Mat::Identity(f, f);
}

/// Z = mD (x) I_f. Requires mD to be one-hot.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mode_selector(const Eigen::VectorXi& mD,
                                                                   Index f) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Index ones = 0;
  for (Index i = 0; i < mD.size(); ++i) {
    if (mD(i) == 1) {
      ++ones;
    } else if (mD(i) != 0) {
      ones = -1;
      break;
    }
  }
  if (ones != 1) throw ModeAmbiguityError("mode marking is not one-hot");
  Mat z(mD.size() * f, f);
  for (Index d = 0; d < mD.size(); ++d)
    z.block(d * f, 0, f, f) = static_cast<Scalar>(mD(d)) * Mat::Identity(f, f);
  return z;
}

/// Row-block concatenation [W_1 ... W_Q].
Eigen::MatrixXd concat_blocks(std::span<const Eigen::MatrixXd> blocks);

/// Index of the single marked mode place. Throws ModeAmbiguityError.
Index active_mode(const Eigen::VectorXi& mode_marking);

/// mD + W^D sigma, with token enabling checked against Pre^D sigma.
Eigen::VectorXi step_discrete(const NetStructure& net, const Eigen::VectorXi& mD,
                              const Eigen::VectorXi& sigma);

/// Refreshes the first u.size() continuous places with u, then applies
/// (I + [W_1 ... W_Q] Z) to the result.
Eigen::VectorXd step_continuous(const Eigen::VectorXd& mC, std::span<const Eigen::MatrixXd> wc,
                                const Eigen::VectorXi& mode_marking, const Eigen::VectorXd& u);

// ---------------------------------------------------------------------------
// Switched hybrid model built on top of the net.

enum class Comparator { Greater, GreaterEqual, Less, LessEqual };

const char* to_string(Comparator c);

/// Switching condition x[component] <cmp> threshold, attached to the discrete
/// transition that moves the token from `from_mode` to `to_mode`.
struct GuardPredicate {
  Index component = 0;
  Comparator cmp = Comparator::Greater;
  double threshold = 0.0;
  Index from_mode = 0;
  Index to_mode = 0;

  bool holds(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Per-mode LTI data: x+ = A x + B u + Fx f, y = C x + Fy f.
struct ModeLti {
  Eigen::MatrixXd A, B, C, Fx, Fy;
};

enum class OutputPlaces { Exclude, Include };

/// A switched linear system together with its ETCPN encoding. Discrete places
/// are the mode places (in mode order); discrete transitions are the guards
/// (in guard order); continuous places are [u; x] or [u; x; y].
struct HybridModel {
  std::vector<ModeLti> modes;
  std::vector<GuardPredicate> guards;
  NetStructure net;
  IncidenceBlocks blocks;
  Index n = 0, p = 0, r = 0, mf = 0;
  OutputPlaces outputs = OutputPlaces::Exclude;

  Index num_modes() const { return static_cast<Index>(modes.size()); }
  Index continuous_size() const { return p + n + (outputs == OutputPlaces::Include ? r : 0); }
  Eigen::VectorXd state(const Marking& m) const { return m.continuous.segment(p, n); }
  Index mode_of(const Marking& m) const { return active_mode(m.discrete); }
};

/// Builds the ETCPN for the given modes and guards with incidence blocks from
/// build_wc / build_wc_with_output, Pre^C = I_f and one test arc per
/// continuous transition.
HybridModel make_hybrid_model(std::vector<ModeLti> modes, std::vector<GuardPredicate> guards,
                              Index initial_mode, const Eigen::VectorXd& x0,
                              OutputPlaces outputs = OutputPlaces::Exclude);

/// Firing vector over discrete transitions: transitions whose input tokens
/// are present and whose guard holds on x. Throws ConflictError when more
/// than one would consume the same token.
Eigen::VectorXi guard_firings(const HybridModel& model, const Eigen::VectorXi& mD,
                              const Eigen::Ref<const Eigen::VectorXd>& x);

/// All enabled transitions (indices into net.transitions) under the ETCPN
/// enabling rules.
std::vector<Index> enabled_transitions(const Marking& marking, const HybridModel& model);

/// One sampled step: fire the enabled guard transition (if any) from x(k),
/// then advance the continuous marking under the newly active mode with input u(k).
Marking step_hybrid(const Marking& marking, const HybridModel& model, const Eigen::VectorXd& u);

}  // namespace etcpn
