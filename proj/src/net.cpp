#include "etcpn/net.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace etcpn {

namespace {

bool is_integral(double v) { return std::isfinite(v) && v == std::round(v); }

Eigen::MatrixXd select(const Eigen::MatrixXd& m, const std::vector<Index>& rows,
                       const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

}  // namespace

std::vector<Index> NetStructure::place_indices(NodeKind kind) const {
  std::vector<Index> out;
  for (size_t i = 0; i < places.size(); ++i)
    if (places[i].kind == kind) out.push_back(static_cast<Index>(i));
  return out;
}

std::vector<Index> NetStructure::transition_indices(NodeKind kind) const {
  std::vector<Index> out;
  for (size_t j = 0; j < transitions.size(); ++j)
    if (transitions[j].kind == kind) out.push_back(static_cast<Index>(j));
  return out;
}

Eigen::MatrixXd NetStructure::block(const Eigen::MatrixXd& m, NodeKind place_kind,
                                    NodeKind transition_kind) const {
  return select(m, place_indices(place_kind), transition_indices(transition_kind));
}

void NetStructure::validate() const {
  const auto np = static_cast<Index>(places.size());
  const auto nt = static_cast<Index>(transitions.size());
  if (pre.rows() != np || pre.cols() != nt || post.rows() != np || post.cols() != nt)
    throw DimensionError("Pre/Post must be |P| x |T| = " + std::to_string(np) + " x " +
                         std::to_string(nt));
  if (!pre.allFinite() || !post.allFinite()) throw ModelError("Pre/Post entries must be finite");

  const auto pd = place_indices(NodeKind::Discrete);
  const auto pc = place_indices(NodeKind::Continuous);
  const auto td = transition_indices(NodeKind::Discrete);
  const auto tc = transition_indices(NodeKind::Continuous);

  // Post weights between continuous nodes carry the signed entries of A_q and B_q.
  if ((pre.array() < 0.0).any()) throw ModelError("Pre entries must be nonnegative");
  for (Index i = 0; i < np; ++i)
    for (Index j = 0; j < nt; ++j)
      if (post(i, j) < 0.0 &&
          !(places[i].kind == NodeKind::Continuous && transitions[j].kind == NodeKind::Continuous))
        throw ModelError("Post entries outside the continuous block must be nonnegative");

  for (Index i : pd)
    for (Index j : td)
      if (!is_integral(pre(i, j)) || !is_integral(post(i, j)))
        throw ModelError("discrete arc weights must be integers (place " + places[i].id +
                         ", transition " + transitions[j].id + ")");

  // Discrete place <-> continuous transition arcs are reciprocal test arcs.
  for (Index i : pd)
    for (Index j : tc)
      if (pre(i, j) != post(i, j))
        throw CouplingError("arc between discrete place " + places[i].id +
                            " and continuous transition " + transitions[j].id +
                            " is not a reciprocal pair");
  for (Index i : pc)
    for (Index j : td)
      if (pre(i, j) != post(i, j))
        throw CouplingError("continuous place " + places[i].id + " is changed by discrete transition " +
                            transitions[j].id);

  if (initial.discrete.size() != static_cast<Index>(pd.size()) ||
      initial.continuous.size() != static_cast<Index>(pc.size()))
    throw DimensionError("initial marking does not match the place partition");
  if ((initial.discrete.array() < 0).any()) throw ModelError("initial discrete marking is negative");
}

IncidenceBlocks incidence(const NetStructure& net) {
  net.validate();
  const auto pd = net.place_indices(NodeKind::Discrete);
  const auto pc = net.place_indices(NodeKind::Continuous);
  const auto td = net.transition_indices(NodeKind::Discrete);
  const auto tc = net.transition_indices(NodeKind::Continuous);
  const Eigen::MatrixXd w = net.post - net.pre;

  IncidenceBlocks out;
  out.wD = select(w, pd, td).array().round().cast<int>().matrix();

  // Group continuous transitions by the discrete place that gates them.
  std::map<Index, std::vector<Index>> groups;
  std::vector<Index> ungated;
  for (Index j : tc) {
    Index gate = -1;
    for (size_t d = 0; d < pd.size(); ++d) {
      if (net.pre(pd[d], j) > 0.0) {
        if (gate >= 0)
          throw ModelError("continuous transition " + net.transitions[j].id +
                           " is gated by more than one discrete place");
        gate = static_cast<Index>(d);
      }
    }
    if (gate < 0)
      ungated.push_back(j);
    else
      groups[gate].push_back(j);
  }
  if (!groups.empty() && !ungated.empty())
    throw ModelError("either every continuous transition is gated by a mode place or none is");

  const auto f = static_cast<Index>(pc.size());
  auto add_block = [&](const std::vector<Index>& cols) {
    if (static_cast<Index>(cols.size()) != f)
      throw DimensionError("each mode must own exactly |P^C| = " + std::to_string(f) +
                           " continuous transitions");
    out.wC.push_back(select(w, pc, cols));
  };
  if (groups.empty()) {
    if (!ungated.empty()) add_block(ungated);
  } else {
    for (const auto& [gate, cols] : groups) {
      out.mode_places.push_back(gate);
      add_block(cols);
    }
  }
  return out;
}

Eigen::MatrixXd concat_blocks(std::span<const Eigen::MatrixXd> blocks) {
  if (blocks.empty()) return {};
  const Index rows = blocks.front().rows();
  Index cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw DimensionError("concat_blocks: row count mismatch");
    cols += b.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Index c = 0;
  for (const auto& b : blocks) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

Index active_mode(const Eigen::VectorXi& mode_marking) {
  Index active = -1;
  for (Index i = 0; i < mode_marking.size(); ++i) {
    if (mode_marking(i) == 0) continue;
    if (mode_marking(i) != 1 || active >= 0) throw ModeAmbiguityError("mode marking is not one-hot");
    active = i;
  }
  if (active < 0) throw ModeAmbiguityError("no mode place is marked");
  return active;
}

Eigen::VectorXi step_discrete(const NetStructure& net, const Eigen::VectorXi& mD,
                              const Eigen::VectorXi& sigma) {
  const auto pd = net.place_indices(NodeKind::Discrete);
  const auto td = net.transition_indices(NodeKind::Discrete);
  if (mD.size() != static_cast<Index>(pd.size()) || sigma.size() != static_cast<Index>(td.size()))
    throw DimensionError("step_discrete: marking or firing vector has the wrong length");
  if ((sigma.array() < 0).any()) throw EnablingError("firing counts must be nonnegative");

  const Eigen::MatrixXi pre = select(net.pre, pd, td).array().round().cast<int>().matrix();
  const Eigen::MatrixXi post = select(net.post, pd, td).array().round().cast<int>().matrix();
  const Eigen::VectorXi consumed = pre * sigma;
  for (Index i = 0; i < mD.size(); ++i)
    if (consumed(i) > mD(i))
      throw EnablingError("place " + net.places[pd[i]].id + " holds " + std::to_string(mD(i)) +
                          " token(s) but the firing consumes " + std::to_string(consumed(i)));
  Eigen::VectorXi next = mD + (post - pre) * sigma;
  if ((next.array() < 0).any()) throw MarkingUnderflowError("discrete marking became negative");
  return next;
}

Eigen::VectorXd step_continuous(const Eigen::VectorXd& mC, std::span<const Eigen::MatrixXd> wc,
                                const Eigen::VectorXi& mode_marking, const Eigen::VectorXd& u) {
  if (wc.empty()) throw DimensionError("step_continuous: no incidence blocks");
  const Index f = mC.size();
  for (const auto& w : wc)
    if (w.rows() != f || w.cols() != f) throw DimensionError("step_continuous: W^C_q must be f x f");
  if (mode_marking.size() != static_cast<Index>(wc.size()))
    throw DimensionError("step_continuous: one mode place per incidence block expected");
  if (u.size() > f) throw DimensionError("step_continuous: input longer than the marking");

  Eigen::VectorXd refreshed = mC;
  refreshed.head(u.size()) = u;
  const Eigen::MatrixXd selected = concat_blocks(wc) * mode_selector(mode_marking, f);
  return refreshed + selected * refreshed;
}

const char* to_string(Comparator c) {
  switch (c) {
    case Comparator::Greater: return ">";
    case Comparator::GreaterEqual: return ">=";
    case Comparator::Less: return "<";
    case Comparator::LessEqual: return "<=";
  }
  return "?";
}

bool GuardPredicate::holds(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double v = x(component);
  switch (cmp) {
    case Comparator::Greater: return v > threshold;
    case Comparator::GreaterEqual: return v >= threshold;
    case Comparator::Less: return v < threshold;
    case Comparator::LessEqual: return v <= threshold;
  }
  return false;
}

HybridModel make_hybrid_model(std::vector<ModeLti> modes, std::vector<GuardPredicate> guards,
                              Index initial_mode, const Eigen::VectorXd& x0, OutputPlaces outputs) {
  if (modes.empty()) throw ModelError("at least one mode is required");
  HybridModel model;
  model.n = modes.front().A.rows();
  model.p = modes.front().B.cols();
  model.r = modes.front().C.rows();
  model.mf = std::max(modes.front().Fx.cols(), modes.front().Fy.cols());
  model.outputs = outputs;
  const Index n = model.n, p = model.p, r = model.r, mf = model.mf;

  for (size_t q = 0; q < modes.size(); ++q) {
    auto& m = modes[q];
    const std::string tag = "mode " + std::to_string(q + 1) + ": ";
    if (m.Fx.size() == 0) m.Fx = Eigen::MatrixXd::Zero(n, mf);
    if (m.Fy.size() == 0) m.Fy = Eigen::MatrixXd::Zero(r, mf);
    if (m.A.rows() != n || m.A.cols() != n) throw DimensionError(tag + "A must be n x n");
    if (m.B.rows() != n || m.B.cols() != p) throw DimensionError(tag + "B must be n x p");
    if (m.C.rows() != r || m.C.cols() != n) throw DimensionError(tag + "C must be r x n");
    if (m.Fx.rows() != n || m.Fx.cols() != mf) throw DimensionError(tag + "Fx must be n x mf");
    if (m.Fy.rows() != r || m.Fy.cols() != mf) throw DimensionError(tag + "Fy must be r x mf");
  }
  const auto Q = static_cast<Index>(modes.size());
  for (const auto& g : guards) {
    if (g.from_mode < 0 || g.from_mode >= Q || g.to_mode < 0 || g.to_mode >= Q ||
        g.from_mode == g.to_mode)
      throw ModelError("guard must connect two distinct existing modes");
    if (g.component < 0 || g.component >= n) throw ModelError("guard component out of range");
  }
  if (initial_mode < 0 || initial_mode >= Q) throw ModelError("initial mode out of range");
  if (x0.size() != n) throw DimensionError("initial state must have n entries");

  const Index f = model.continuous_size();
  const auto G = static_cast<Index>(guards.size());
  NetStructure& net = model.net;
  for (Index q = 0; q < Q; ++q) net.places.push_back({"q" + std::to_string(q + 1), NodeKind::Discrete});
  for (Index i = 0; i < p; ++i) net.places.push_back({"u" + std::to_string(i + 1), NodeKind::Continuous});
  for (Index i = 0; i < n; ++i) net.places.push_back({"x" + std::to_string(i + 1), NodeKind::Continuous});
  if (outputs == OutputPlaces::Include)
    for (Index i = 0; i < r; ++i)
      net.places.push_back({"y" + std::to_string(i + 1), NodeKind::Continuous});
  for (const auto& g : guards)
    net.transitions.push_back({"t" + std::to_string(g.from_mode + 1) + "_" + std::to_string(g.to_mode + 1),
                               NodeKind::Discrete});
  for (Index q = 0; q < Q; ++q)
    for (Index j = 0; j < f; ++j)
      net.transitions.push_back(
          {"c" + std::to_string(q + 1) + "_" + std::to_string(j + 1), NodeKind::Continuous});

  const Index np = Q + f;
  const Index nt = G + Q * f;
  net.pre = Eigen::MatrixXd::Zero(np, nt);
  net.post = Eigen::MatrixXd::Zero(np, nt);
  for (Index g = 0; g < G; ++g) {
    net.pre(guards[g].from_mode, g) = 1.0;
    net.post(guards[g].to_mode, g) = 1.0;
  }
  for (Index q = 0; q < Q; ++q) {
    const auto& m = modes[q];
    const Eigen::MatrixXd wc = outputs == OutputPlaces::Include ? build_wc_with_output(m.A, m.B, m.C)
                                                                : build_wc(m.A, m.B);
    const Index col = G + q * f;
    net.pre.block(Q, col, f, f).setIdentity();
    net.post.block(Q, col, f, f) = Eigen::MatrixXd::Identity(f, f) + wc;
    // Test arcs from the mode place.
    net.pre.block(q, col, 1, f).setOnes();
    net.post.block(q, col, 1, f).setOnes();
  }

  net.initial.discrete = Eigen::VectorXi::Zero(Q);
  net.initial.discrete(initial_mode) = 1;
  net.initial.continuous = Eigen::VectorXd::Zero(f);
  net.initial.continuous.segment(p, n) = x0;
  if (outputs == OutputPlaces::Include)
    net.initial.continuous.tail(r) = modes[initial_mode].C * x0;
  net.initial.step = 0;

  model.modes = std::move(modes);
  model.guards = std::move(guards);
  model.blocks = incidence(net);
  return model;
}

Eigen::VectorXi guard_firings(const HybridModel& model, const Eigen::VectorXi& mD,
                              const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto G = static_cast<Index>(model.guards.size());
  Eigen::VectorXi sigma = Eigen::VectorXi::Zero(G);
  Eigen::VectorXi demand = Eigen::VectorXi::Zero(mD.size());
  for (Index g = 0; g < G; ++g) {
    const auto& guard = model.guards[g];
    if (mD(guard.from_mode) >= 1 && guard.holds(x)) {
      sigma(g) = 1;
      demand(guard.from_mode) += 1;
    }
  }
  for (Index i = 0; i < mD.size(); ++i)
    if (demand(i) > mD(i))
      throw ConflictError("conflicting guards enabled in mode " + std::to_string(i + 1));
  return sigma;
}

std::vector<Index> enabled_transitions(const Marking& marking, const HybridModel& model) {
  const NetStructure& net = model.net;
  const auto pd = net.place_indices(NodeKind::Discrete);
  const auto pc = net.place_indices(NodeKind::Continuous);
  std::vector<Index> out;
  if (marking.discrete.size() != static_cast<Index>(pd.size()) ||
      marking.continuous.size() != static_cast<Index>(pc.size()))
    return out;
  const Eigen::VectorXd x = model.state(marking);

  Index guard_idx = 0;
  for (size_t j = 0; j < net.transitions.size(); ++j) {
    const auto& t = net.transitions[j];
    if (t.kind == NodeKind::Discrete) {
      bool tokens = true;
      for (size_t d = 0; d < pd.size(); ++d)
        if (marking.discrete(d) < net.pre(pd[d], j)) tokens = false;
      if (tokens && model.guards[guard_idx].holds(x)) out.push_back(static_cast<Index>(j));
      ++guard_idx;
      continue;
    }
    bool gated = true;
    for (size_t d = 0; d < pd.size(); ++d)
      if (net.pre(pd[d], j) > 0.0 && marking.discrete(d) < net.pre(pd[d], j)) gated = false;
    bool flowing = true;
    double speed = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < pc.size(); ++c) {
      const double w = net.pre(pc[c], j);
      if (w <= 0.0) continue;
      if (!(marking.continuous(c) > 0.0)) flowing = false;
      speed = std::min(speed, marking.continuous(c) / w);
    }
    if (gated && flowing && speed <= t.max_speed) out.push_back(static_cast<Index>(j));
  }
  return out;
}

Marking step_hybrid(const Marking& marking, const HybridModel& model, const Eigen::VectorXd& u) {
  if (u.size() != model.p) throw DimensionError("step_hybrid: input must have p entries");
  active_mode(marking.discrete);
  const Eigen::VectorXi sigma = guard_firings(model, marking.discrete, model.state(marking));
  Marking next;
  next.discrete = step_discrete(model.net, marking.discrete, sigma);
  Eigen::VectorXi mode_marking(static_cast<Index>(model.blocks.mode_places.size()));
  for (size_t q = 0; q < model.blocks.mode_places.size(); ++q)
    mode_marking(q) = next.discrete(model.blocks.mode_places[q]);
  next.continuous = step_continuous(marking.continuous, model.blocks.wC, mode_marking, u);
  next.step = marking.step + 1;
  return next;
}

}  // namespace etcpn
