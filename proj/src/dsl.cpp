#include "etcpn/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace etcpn::dsl {

namespace {

constexpr int kMaxDepth = 64;
constexpr Index kMaxMatrixEntries = 1 << 16;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return a.size() == 0 || (a.array() == b.array()).all();
}

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// Cursor over a single line. Columns are 1-based in diagnostics.
class Cursor {
 public:
  Cursor(std::string_view text, int line) : text_(text), line_(line) {}

  void skip_ws() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  char peek_at(size_t offset) const {
    return pos_ + offset < text_.size() ? text_[pos_ + offset] : '\0';
  }
  void advance(size_t k = 1) { pos_ = std::min(text_.size(), pos_ + k); }
  int column() const { return static_cast<int>(pos_) + 1; }
  int line() const { return line_; }
  size_t pos() const { return pos_; }
  std::string_view rest() const { return text_.substr(pos_); }

  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool consume(std::string_view s) {
    skip_ws();
    if (text_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
      return true;
    }
    return false;
  }

  /// Identifier-like word: letters, digits, '_'.
  std::string_view word() {
    skip_ws();
    const size_t start = pos_;
    while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  /// Any run of non-space characters.
  std::string_view token() {
    skip_ws();
    const size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  std::optional<long> integer() {
    skip_ws();
    const size_t start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    std::string_view digits = text_.substr(start, pos_ - start);
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    long v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) {
      pos_ = start;
      return std::nullopt;
    }
    return v;
  }

 private:
  std::string_view text_;
  int line_;
  size_t pos_ = 0;
};

struct ParseError {
  int column;
  std::string message;
};

/// Recursive-descent evaluator for the constant-expression grammar.
class ExprParser {
 public:
  explicit ExprParser(Cursor& c) : c_(c) {}

  std::optional<double> parse(std::string& error) {
    auto v = expr(0, error);
    if (v && !std::isfinite(*v)) {
      error = "expression is not finite";
      return std::nullopt;
    }
    return v;
  }

 private:
  std::optional<double> expr(int depth, std::string& error) {
    auto lhs = term(depth, error);
    if (!lhs) return std::nullopt;
    double v = *lhs;
    while (true) {
      c_.skip_ws();
      const char op = c_.peek();
      if (op != '+' && op != '-') break;
      c_.advance();
      auto rhs = term(depth, error);
      if (!rhs) return std::nullopt;
      v = op == '+' ? v + *rhs : v - *rhs;
    }
    return v;
  }

  std::optional<double> term(int depth, std::string& error) {
    auto lhs = unary(depth, error);
    if (!lhs) return std::nullopt;
    double v = *lhs;
    while (true) {
      c_.skip_ws();
      const char op = c_.peek();
      if (op != '*' && op != '/') break;
      c_.advance();
      auto rhs = unary(depth, error);
      if (!rhs) return std::nullopt;
      v = op == '*' ? v * *rhs : v / *rhs;
    }
    return v;
  }

  std::optional<double> unary(int depth, std::string& error) {
    if (depth > kMaxDepth) {
      error = "expression nested too deeply";
      return std::nullopt;
    }
    c_.skip_ws();
    if (c_.peek() == '-' || c_.peek() == '+') {
      const bool neg = c_.peek() == '-';
      c_.advance();
      auto v = unary(depth + 1, error);
      if (!v) return std::nullopt;
      return neg ? -*v : *v;
    }
    return primary(depth, error);
  }

  std::optional<double> primary(int depth, std::string& error) {
    c_.skip_ws();
    const char ch = c_.peek();
    if (ch == '(') {
      c_.advance();
      auto v = expr(depth + 1, error);
      if (!v) return std::nullopt;
      if (!c_.consume(')')) {
        error = "expected ')'";
        return std::nullopt;
      }
      return v;
    }
    if (is_digit(ch) || (ch == '.' && is_digit(c_.peek_at(1)))) return number(error);
    if (is_alpha(ch)) {
      const std::string_view name = c_.word();
      if (name == "pi") return std::numbers::pi;
      if (name == "cos" || name == "sin") {
        if (!c_.consume('(')) {
          error = "expected '(' after " + std::string(name);
          return std::nullopt;
        }
        auto v = expr(depth + 1, error);
        if (!v) return std::nullopt;
        if (!c_.consume(')')) {
          error = "expected ')'";
          return std::nullopt;
        }
        return name == "cos" ? std::cos(*v) : std::sin(*v);
      }
      error = "unknown identifier '" + std::string(name) + "'";
      return std::nullopt;
    }
    error = ch == '\0' ? "expected a value" : std::string("unexpected character '") + ch + "'";
    return std::nullopt;
  }

  std::optional<double> number(std::string& error) {
    const std::string_view rest = c_.rest();
    size_t len = 0;
    while (len < rest.size() && is_digit(rest[len])) ++len;
    if (len < rest.size() && rest[len] == '.') {
      ++len;
      while (len < rest.size() && is_digit(rest[len])) ++len;
    }
    if (len < rest.size() && (rest[len] == 'e' || rest[len] == 'E')) {
      size_t e = len + 1;
      if (e < rest.size() && (rest[e] == '+' || rest[e] == '-')) ++e;
      if (e < rest.size() && is_digit(rest[e])) {
        while (e < rest.size() && is_digit(rest[e])) ++e;
        len = e;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + len, v);
    if (ec != std::errc() || ptr != rest.data() + len) {
      error = "malformed number";
      return std::nullopt;
    }
    c_.advance(len);
    return v;
  }

  Cursor& c_;
};

std::optional<double> read_expr(Cursor& c, std::vector<Diagnostic>& diags) {
  c.skip_ws();
  const int col = c.column();
  std::string error;
  ExprParser p(c);
  auto v = p.parse(error);
  if (!v) diags.push_back({c.line(), col, error});
  return v;
}

std::optional<Eigen::MatrixXd> read_matrix(Cursor& c, std::vector<Diagnostic>& diags) {
  c.skip_ws();
  const int col = c.column();
  if (!c.consume('[')) {
    diags.push_back({c.line(), col, "expected '[' to start a matrix"});
    return std::nullopt;
  }
  std::vector<std::vector<double>> rows;
  if (c.consume(']')) return Eigen::MatrixXd(0, 0);
  rows.emplace_back();
  Index entries = 0;
  while (true) {
    auto v = read_expr(c, diags);
    if (!v) return std::nullopt;
    if (++entries > kMaxMatrixEntries) {
      diags.push_back({c.line(), c.column(), "matrix literal too large"});
      return std::nullopt;
    }
    rows.back().push_back(*v);
    if (c.consume(',')) continue;
    if (c.consume(';')) {
      rows.emplace_back();
      continue;
    }
    if (c.consume(']')) break;
    c.skip_ws();
    diags.push_back({c.line(), c.column(), "expected ',', ';' or ']' in matrix"});
    return std::nullopt;
  }
  const size_t ncols = rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != ncols) {
      diags.push_back({c.line(), col, "matrix rows have different lengths"});
      return std::nullopt;
    }
  }
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(ncols));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < ncols; ++j) m(i, j) = rows[i][j];
  return m;
}

/// key=value pairs; returns the position of each value for later diagnostics.
struct KeyValue {
  std::string key;
  int column;
  size_t value_pos;
};

std::optional<KeyValue> read_key(Cursor& c, std::vector<Diagnostic>& diags) {
  c.skip_ws();
  const int col = c.column();
  const std::string_view key = c.word();
  if (key.empty() || !c.consume('=')) {
    diags.push_back({c.line(), col, "expected key=value"});
    return std::nullopt;
  }
  return KeyValue{std::string(key), col, c.pos()};
}

struct Positions {
  int dims_line = 0;
  std::map<size_t, int> mode_line;
  std::map<std::pair<size_t, std::string>, std::pair<int, int>> block_pos;
  std::vector<std::pair<int, int>> guard_pos;
  std::vector<std::pair<int, int>> fault_pos;
  std::vector<std::pair<int, int>> gain_pos;
  std::vector<std::pair<int, int>> detector_pos;
  std::pair<int, int> initial_mode_pos{0, 0};
  std::pair<int, int> initial_state_pos{0, 0};
};

class DocumentParser {
 public:
  ParseResult run(std::string_view text) {
    int lineno = 0;
    size_t start = 0;
    while (start <= text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++lineno;
      std::string_view line = text.substr(start, end - start);
      const size_t hash = line.find('#');
      if (hash != std::string_view::npos) line = line.substr(0, hash);
      statement(Cursor(line, lineno));
      if (end == text.size()) break;
      start = end + 1;
    }
    if (current_mode_) {
      diag(pos_.mode_line[*current_mode_], 1, "mode block is not closed with 'end'");
      current_mode_.reset();
    }
    validate();
    ParseResult out;
    out.diagnostics = std::move(diags_);
    if (out.diagnostics.empty()) out.document = std::move(doc_);
    return out;
  }

 private:
  void diag(int line, int col, std::string msg) { diags_.push_back({line, col, std::move(msg)}); }

  void expect_end(Cursor& c) {
    if (!c.at_end()) diag(c.line(), c.column(), "unexpected trailing text");
  }

  void statement(Cursor c) {
    if (c.at_end()) return;
    const int col = c.column();
    const std::string_view key = c.word();
    if (key.empty()) {
      diag(c.line(), col, "expected a keyword");
      return;
    }
    if (current_mode_) {
      mode_statement(c, key, col);
      return;
    }
    if (key == "name") return name_statement(c, col);
    if (key == "dims") return dims_statement(c, col);
    if (key == "mode") return mode_open(c, col);
    if (key == "guard") return guard_statement(c, col);
    if (key == "initial_mode") return initial_mode_statement(c, col);
    if (key == "initial_state") return initial_state_statement(c, col);
    if (key == "input") return input_statement(c, col);
    if (key == "fault") return fault_statement(c, col);
    if (key == "gains") return gains_statement(c, col);
    if (key == "detector") return detector_statement(c, col);
    if (key == "end") return diag(c.line(), col, "'end' without an open mode block");
    diag(c.line(), col, "unknown key '" + std::string(key) + "'");
  }

  void name_statement(Cursor& c, int col) {
    if (seen_name_) return diag(c.line(), col, "duplicate name declaration");
    seen_name_ = true;
    const std::string_view tok = c.token();
    if (tok.empty()) return diag(c.line(), c.column(), "name needs a value");
    doc_.name = std::string(tok);
    expect_end(c);
  }

  void dims_statement(Cursor& c, int col) {
    if (pos_.dims_line) return diag(c.line(), col, "duplicate dims declaration");
    pos_.dims_line = c.line();
    std::set<std::string> seen;
    while (!c.at_end()) {
      auto kv = read_key(c, diags_);
      if (!kv) return;
      auto v = c.integer();
      if (!v || *v < 0 || *v > 10000) return diag(c.line(), c.column(), "dimension must be a nonnegative integer");
      if (!seen.insert(kv->key).second) return diag(c.line(), kv->column, "duplicate key '" + kv->key + "'");
      if (kv->key == "n") doc_.dims.n = *v;
      else if (kv->key == "p") doc_.dims.p = *v;
      else if (kv->key == "r") doc_.dims.r = *v;
      else if (kv->key == "mf") doc_.dims.mf = *v;
      else if (kv->key == "modes") doc_.dims.modes = *v;
      else return diag(c.line(), kv->column, "unknown key '" + kv->key + "'");
    }
    for (const char* k : {"n", "p", "r", "modes"})
      if (!seen.count(k)) diag(c.line(), col, std::string("dims is missing '") + k + "'");
  }

  void mode_open(Cursor& c, int col) {
    auto id = c.integer();
    if (!id) return diag(c.line(), c.column(), "mode needs an integer id");
    for (const auto& m : doc_.modes)
      if (m.id == *id) diag(c.line(), col, "duplicate mode id " + std::to_string(*id));
    expect_end(c);
    doc_.modes.push_back(ModeBlock{*id, {}, {}, {}, {}, {}});
    current_mode_ = doc_.modes.size() - 1;
    pos_.mode_line[*current_mode_] = c.line();
  }

  void mode_statement(Cursor& c, std::string_view key, int col) {
    if (key == "end") {
      expect_end(c);
      current_mode_.reset();
      return;
    }
    ModeBlock& m = doc_.modes[*current_mode_];
    Eigen::MatrixXd* target = nullptr;
    if (key == "A") target = &m.A;
    else if (key == "B") target = &m.B;
    else if (key == "C") target = &m.C;
    else if (key == "Fx") target = &m.Fx;
    else if (key == "Fy") target = &m.Fy;
    if (!target) return diag(c.line(), col, "unknown key '" + std::string(key) + "' in mode block");
    const auto slot = std::make_pair(*current_mode_, std::string(key));
    if (pos_.block_pos.count(slot))
      return diag(c.line(), col, "duplicate block " + std::string(key) + " in mode " + std::to_string(m.id));
    if (!c.consume('=')) return diag(c.line(), c.column(), "expected '='");
    auto mat = read_matrix(c, diags_);
    if (!mat) return;
    *target = std::move(*mat);
    pos_.block_pos[slot] = {c.line(), col};
    expect_end(c);
  }

  void guard_statement(Cursor& c, int col) {
    GuardDecl g;
    auto from = c.integer();
    if (!from) return diag(c.line(), c.column(), "guard needs a source mode id");
    if (!c.consume("->")) return diag(c.line(), c.column(), "expected '->'");
    auto to = c.integer();
    if (!to) return diag(c.line(), c.column(), "guard needs a target mode id");
    if (c.word() != "when") return diag(c.line(), c.column(), "expected 'when'");
    c.skip_ws();
    const int comp_col = c.column();
    const std::string_view var = c.word();
    if (var.size() < 2 || var.front() != 'x')
      return diag(c.line(), comp_col, "guard variable must be x<i>");
    long comp = 0;
    auto [ptr, ec] = std::from_chars(var.data() + 1, var.data() + var.size(), comp);
    if (ec != std::errc() || ptr != var.data() + var.size() || comp < 1)
      return diag(c.line(), comp_col, "guard variable must be x<i> with i >= 1");
    if (c.consume(">=")) g.cmp = Comparator::GreaterEqual;
    else if (c.consume("<=")) g.cmp = Comparator::LessEqual;
    else if (c.consume('>')) g.cmp = Comparator::Greater;
    else if (c.consume('<')) g.cmp = Comparator::Less;
    else return diag(c.line(), c.column(), "expected a comparator (>, >=, <, <=)");
    auto thr = read_expr(c, diags_);
    if (!thr) return;
    g.from = *from;
    g.to = *to;
    g.component = comp - 1;
    g.threshold = *thr;
    doc_.guards.push_back(g);
    pos_.guard_pos.emplace_back(c.line(), col);
    expect_end(c);
  }

  void initial_mode_statement(Cursor& c, int col) {
    if (pos_.initial_mode_pos.first) return diag(c.line(), col, "duplicate initial_mode declaration");
    auto id = c.integer();
    if (!id) return diag(c.line(), c.column(), "initial_mode needs a mode id");
    doc_.initial_mode = *id;
    pos_.initial_mode_pos = {c.line(), col};
    expect_end(c);
  }

  void initial_state_statement(Cursor& c, int col) {
    if (pos_.initial_state_pos.first) return diag(c.line(), col, "duplicate initial_state declaration");
    auto m = read_matrix(c, diags_);
    if (!m) return;
    if (m->cols() != 1 && m->size() != 0) return diag(c.line(), col, "initial_state must be a column vector");
    doc_.initial_state = m->size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(m->col(0));
    pos_.initial_state_pos = {c.line(), col};
    expect_end(c);
  }

  void input_statement(Cursor& c, int col) {
    if (doc_.input) return diag(c.line(), col, "duplicate input declaration");
    InputSignal in;
    const std::string_view kind = c.word();
    if (kind == "constant") in.kind = InputKind::Constant;
    else if (kind == "step") in.kind = InputKind::Step;
    else if (kind == "sine") in.kind = InputKind::Sine;
    else if (kind == "prbs") in.kind = InputKind::Prbs;
    else return diag(c.line(), c.column(), "input kind must be constant, step, sine or prbs");
    std::set<std::string> seen;
    while (!c.at_end()) {
      auto kv = read_key(c, diags_);
      if (!kv) return;
      if (!seen.insert(kv->key).second) return diag(c.line(), kv->column, "duplicate key '" + kv->key + "'");
      if (kv->key == "amplitude" || kv->key == "period") {
        auto v = read_expr(c, diags_);
        if (!v) return;
        if (kv->key == "period" && !(*v > 0.0)) return diag(c.line(), kv->column, "period must be positive");
        (kv->key == "amplitude" ? in.amplitude : in.period) = *v;
      } else if (kv->key == "at" || kv->key == "width" || kv->key == "hold" || kv->key == "seed") {
        auto v = c.integer();
        if (!v) return diag(c.line(), c.column(), "expected an integer");
        if (kv->key == "at") in.at = *v;
        else if (kv->key == "width") in.width = *v;
        else if (kv->key == "hold") {
          if (*v < 1) return diag(c.line(), kv->column, "hold must be >= 1");
          in.hold = *v;
        } else {
          if (*v < 0) return diag(c.line(), kv->column, "seed must be nonnegative");
          in.seed = static_cast<std::uint64_t>(*v);
        }
      } else {
        return diag(c.line(), kv->column, "unknown key '" + kv->key + "'");
      }
    }
    doc_.input = in;
  }

  void fault_statement(Cursor& c, int col) {
    FaultDecl f;
    const std::string_view kind = c.word();
    if (kind == "sensor") f.kind = FaultKind::SensorAdditive;
    else if (kind == "state") f.kind = FaultKind::StateAdditive;
    else if (kind == "block") f.kind = FaultKind::ModeBlocking;
    else return diag(c.line(), c.column(), "fault kind must be sensor, state or block");
    bool have_mode = false;
    while (!c.at_end()) {
      c.skip_ws();
      if (is_digit(c.peek())) {
        const int icol = c.column();
        auto a = c.integer();
        if (!a || !c.consume("..")) return diag(c.line(), icol, "expected an interval a..b");
        auto b = c.integer();
        if (!b) return diag(c.line(), c.column(), "expected the interval end");
        if (*b < *a) return diag(c.line(), icol, "interval end precedes its start");
        f.intervals.push_back({*a, *b});
        continue;
      }
      auto kv = read_key(c, diags_);
      if (!kv) return;
      if (kv->key == "magnitude" && f.kind != FaultKind::ModeBlocking) {
        c.skip_ws();
        if (c.peek() == '[') {
          auto m = read_matrix(c, diags_);
          if (!m) return;
          if (m->cols() != 1 && m->size() != 0) return diag(c.line(), kv->column, "magnitude must be a column vector");
          f.magnitude = m->size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(m->col(0));
        } else {
          auto v = read_expr(c, diags_);
          if (!v) return;
          f.magnitude = Eigen::VectorXd::Constant(1, *v);
        }
      } else if (kv->key == "mode" && f.kind == FaultKind::ModeBlocking) {
        auto v = c.integer();
        if (!v) return diag(c.line(), c.column(), "expected a mode id");
        f.mode = *v;
        have_mode = true;
      } else {
        return diag(c.line(), kv->column, "unknown key '" + kv->key + "'");
      }
    }
    if (f.intervals.empty()) return diag(c.line(), col, "fault needs at least one interval");
    if (f.kind == FaultKind::ModeBlocking && !have_mode) return diag(c.line(), col, "block fault needs mode=<id>");
    doc_.faults.push_back(std::move(f));
    pos_.fault_pos.emplace_back(c.line(), col);
  }

  void gains_statement(Cursor& c, int col) {
    auto id = c.integer();
    if (!id) return diag(c.line(), c.column(), "gains needs a mode id");
    if (c.word() != "L" || !c.consume('=')) return diag(c.line(), c.column(), "expected 'L ='");
    auto m = read_matrix(c, diags_);
    if (!m) return;
    for (const auto& g : doc_.gains)
      if (g.mode == *id) return diag(c.line(), col, "duplicate gains for mode " + std::to_string(*id));
    doc_.gains.push_back({*id, std::move(*m)});
    pos_.gain_pos.emplace_back(c.line(), col);
    expect_end(c);
  }

  void detector_statement(Cursor& c, int col) {
    DetectorDecl d;
    const std::string_view kind = c.word();
    if (kind == "ocsvm") d.kind = DetectorKind::OcSvm;
    else if (kind == "svdd") d.kind = DetectorKind::Svdd;
    else if (kind == "ee") d.kind = DetectorKind::EllipticEnvelope;
    else return diag(c.line(), c.column(), "detector kind must be ocsvm, svdd or ee");
    std::set<std::string> seen;
    while (!c.at_end()) {
      auto kv = read_key(c, diags_);
      if (!kv) return;
      if (!seen.insert(kv->key).second) return diag(c.line(), kv->column, "duplicate key '" + kv->key + "'");
      if (kv->key == "gamma" && c.consume("scale")) continue;
      if (kv->key != "nu" && kv->key != "gamma" && kv->key != "contamination")
        return diag(c.line(), kv->column, "unknown key '" + kv->key + "'");
      auto v = read_expr(c, diags_);
      if (!v) return;
      if (kv->key == "nu") {
        if (!(*v > 0.0 && *v <= 1.0)) return diag(c.line(), kv->column, "nu must be in (0, 1]");
        d.nu = *v;
      } else if (kv->key == "gamma") {
        if (!(*v > 0.0)) return diag(c.line(), kv->column, "gamma must be positive");
        d.gamma = *v;
      } else {
        if (!(*v > 0.0 && *v < 0.5)) return diag(c.line(), kv->column, "contamination must be in (0, 0.5)");
        d.contamination = *v;
      }
    }
    doc_.detectors.push_back(d);
    pos_.detector_pos.emplace_back(c.line(), col);
  }

  void check_block(size_t mi, const char* key, Eigen::MatrixXd& m, Index rows, Index cols, bool optional) {
    const ModeBlock& mode = doc_.modes[mi];
    auto it = pos_.block_pos.find({mi, key});
    if (it == pos_.block_pos.end()) {
      if (optional) {
        m = Eigen::MatrixXd::Zero(rows, cols);
        return;
      }
      diag(pos_.mode_line[mi], 1, "mode " + std::to_string(mode.id) + ": block " + key + " is missing");
      return;
    }
    if (m.size() == 0 && rows * cols == 0) {
      m = Eigen::MatrixXd::Zero(rows, cols);
      return;
    }
    if (m.rows() != rows || m.cols() != cols)
      diag(it->second.first, it->second.second,
           "mode " + std::to_string(mode.id) + ": block " + key + " is " + shape(m) + ", expected " +
               std::to_string(rows) + "x" + std::to_string(cols));
  }

  void validate() {
    if (doc_.modes.empty()) {
      diag(1, 1, "no modes declared");
      return;
    }
    if (!pos_.dims_line) {
      diag(1, 1, "missing dims declaration");
      return;
    }
    const Dimensions& d = doc_.dims;
    if (static_cast<Index>(doc_.modes.size()) != d.modes)
      diag(pos_.dims_line, 1,
           "dims declares " + std::to_string(d.modes) + " modes but " +
               std::to_string(doc_.modes.size()) + " are defined");
    for (size_t mi = 0; mi < doc_.modes.size(); ++mi) {
      ModeBlock& m = doc_.modes[mi];
      check_block(mi, "A", m.A, d.n, d.n, false);
      check_block(mi, "B", m.B, d.n, d.p, false);
      check_block(mi, "C", m.C, d.r, d.n, false);
      check_block(mi, "Fx", m.Fx, d.n, d.mf, true);
      check_block(mi, "Fy", m.Fy, d.r, d.mf, true);
    }
    for (size_t i = 0; i < doc_.guards.size(); ++i) {
      const auto& g = doc_.guards[i];
      const auto [line, col] = pos_.guard_pos[i];
      if (doc_.mode_index(g.from) < 0 || doc_.mode_index(g.to) < 0)
        diag(line, col, "guard references an undeclared mode");
      else if (g.from == g.to)
        diag(line, col, "guard must connect two different modes");
      if (g.component >= d.n) diag(line, col, "guard variable x" + std::to_string(g.component + 1) + " exceeds n");
    }
    if (!pos_.initial_mode_pos.first) {
      doc_.initial_mode = doc_.modes.front().id;
    } else if (doc_.mode_index(doc_.initial_mode) < 0) {
      diag(pos_.initial_mode_pos.first, pos_.initial_mode_pos.second, "initial_mode references an undeclared mode");
    }
    if (!pos_.initial_state_pos.first) {
      doc_.initial_state = Eigen::VectorXd::Zero(d.n);
    } else if (doc_.initial_state.size() != d.n) {
      diag(pos_.initial_state_pos.first, pos_.initial_state_pos.second,
           "initial_state has " + std::to_string(doc_.initial_state.size()) + " entries, expected " +
               std::to_string(d.n));
    }
    for (size_t i = 0; i < doc_.faults.size(); ++i) {
      const auto& f = doc_.faults[i];
      const auto [line, col] = pos_.fault_pos[i];
      if (f.kind == FaultKind::ModeBlocking && doc_.mode_index(f.mode) < 0)
        diag(line, col, "block fault references an undeclared mode");
      if (f.magnitude.size() != 0 && f.magnitude.size() != d.mf)
        diag(line, col, "fault magnitude has " + std::to_string(f.magnitude.size()) + " entries, expected mf = " +
                            std::to_string(d.mf));
      for (const auto& iv : f.intervals)
        if (iv.first < 0) diag(line, col, "fault interval starts before step 0");
    }
    for (size_t i = 0; i < doc_.gains.size(); ++i) {
      const auto& g = doc_.gains[i];
      const auto [line, col] = pos_.gain_pos[i];
      if (doc_.mode_index(g.mode) < 0) diag(line, col, "gains reference an undeclared mode");
      if (g.L.rows() != d.n || g.L.cols() != d.r)
        diag(line, col, "gain L is " + shape(g.L) + ", expected " + std::to_string(d.n) + "x" + std::to_string(d.r));
    }
  }

  ModelDocument doc_;
  Positions pos_;
  std::vector<Diagnostic> diags_;
  std::optional<size_t> current_mode_;
  bool seen_name_ = false;
};

const char* kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::SensorAdditive: return "sensor";
    case FaultKind::StateAdditive: return "state";
    case FaultKind::ModeBlocking: return "block";
  }
  return "?";
}

const char* kind_name(InputKind k) {
  switch (k) {
    case InputKind::Constant: return "constant";
    case InputKind::Step: return "step";
    case InputKind::Sine: return "sine";
    case InputKind::Prbs: return "prbs";
  }
  return "?";
}

const char* kind_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::OcSvm: return "ocsvm";
    case DetectorKind::Svdd: return "svdd";
    case DetectorKind::EllipticEnvelope: return "ee";
  }
  return "?";
}

}  // namespace

Index ModelDocument::mode_index(long id) const {
  for (size_t i = 0; i < modes.size(); ++i)
    if (modes[i].id == id) return static_cast<Index>(i);
  return -1;
}

bool operator==(const ModelDocument& a, const ModelDocument& b) {
  if (a.name != b.name || !(a.dims == b.dims) || a.modes.size() != b.modes.size() || !(a.guards == b.guards) ||
      a.initial_mode != b.initial_mode || !same_matrix(a.initial_state, b.initial_state) || a.input != b.input ||
      a.faults.size() != b.faults.size() || a.gains.size() != b.gains.size() || !(a.detectors == b.detectors))
    return false;
  for (size_t i = 0; i < a.modes.size(); ++i) {
    const auto& x = a.modes[i];
    const auto& y = b.modes[i];
    if (x.id != y.id || !same_matrix(x.A, y.A) || !same_matrix(x.B, y.B) || !same_matrix(x.C, y.C) ||
        !same_matrix(x.Fx, y.Fx) || !same_matrix(x.Fy, y.Fy))
      return false;
  }
  for (size_t i = 0; i < a.faults.size(); ++i) {
    const auto& x = a.faults[i];
    const auto& y = b.faults[i];
    if (x.kind != y.kind || x.intervals != y.intervals || !same_matrix(x.magnitude, y.magnitude) || x.mode != y.mode)
      return false;
  }
  for (size_t i = 0; i < a.gains.size(); ++i)
    if (a.gains[i].mode != b.gains[i].mode || !same_matrix(a.gains[i].L, b.gains[i].L)) return false;
  return true;
}

std::string ParseResult::message() const {
  std::ostringstream os;
  for (const auto& d : diagnostics) os << d.line << ":" << d.column << ": " << d.message << "\n";
  return os.str();
}

ParseResult parse(std::string_view text) {
  try {
    return DocumentParser{}.run(text);
  } catch (const std::exception& e) {
    ParseResult r;
    r.diagnostics.push_back({0, 0, std::string("internal parser error: ") + e.what()});
    return r;
  }
}

std::optional<double> evaluate_expression(std::string_view text) {
  Cursor c(text, 1);
  std::vector<Diagnostic> diags;
  auto v = read_expr(c, diags);
  if (!v || !c.at_end()) return std::nullopt;
  return v;
}

std::string format_matrix(const Eigen::MatrixXd& m) {
  std::string out = "[";
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += format_number(m(i, j));
    }
  }
  return out + "]";
}

std::optional<Eigen::MatrixXd> parse_matrix(std::string_view text) {
  Cursor c(text, 1);
  std::vector<Diagnostic> diags;
  auto m = read_matrix(c, diags);
  if (!m || !c.at_end()) return std::nullopt;
  return m;
}

std::string serialize(const ModelDocument& doc) {
  std::ostringstream os;
  if (!doc.name.empty()) os << "name " << doc.name << "\n";
  const auto& d = doc.dims;
  os << "dims n=" << d.n << " p=" << d.p << " r=" << d.r << " mf=" << d.mf << " modes=" << d.modes << "\n";
  for (const auto& m : doc.modes) {
    os << "mode " << m.id << "\n";
    os << "  A = " << format_matrix(m.A) << "\n";
    os << "  B = " << format_matrix(m.B) << "\n";
    os << "  C = " << format_matrix(m.C) << "\n";
    if (m.Fx.size()) os << "  Fx = " << format_matrix(m.Fx) << "\n";
    if (m.Fy.size()) os << "  Fy = " << format_matrix(m.Fy) << "\n";
    os << "end\n";
  }
  for (const auto& g : doc.guards)
    os << "guard " << g.from << " -> " << g.to << " when x" << (g.component + 1) << " " << to_string(g.cmp) << " "
       << format_number(g.threshold) << "\n";
  os << "initial_mode " << doc.initial_mode << "\n";
  os << "initial_state " << format_matrix(doc.initial_state) << "\n";
  if (doc.input) {
    const auto& in = *doc.input;
    os << "input " << kind_name(in.kind) << " amplitude=" << format_number(in.amplitude) << " at=" << in.at
       << " width=" << in.width << " period=" << format_number(in.period) << " seed=" << in.seed
       << " hold=" << in.hold << "\n";
  }
  for (const auto& f : doc.faults) {
    os << "fault " << kind_name(f.kind);
    for (const auto& iv : f.intervals) os << " " << iv.first << ".." << iv.last;
    if (f.kind == FaultKind::ModeBlocking)
      os << " mode=" << f.mode;
    else if (f.magnitude.size())
      os << " magnitude=" << format_matrix(f.magnitude);
    os << "\n";
  }
  for (const auto& g : doc.gains) os << "gains " << g.mode << " L = " << format_matrix(g.L) << "\n";
  for (const auto& det : doc.detectors) {
    os << "detector " << kind_name(det.kind);
    if (det.nu) os << " nu=" << format_number(*det.nu);
    if (det.gamma) os << " gamma=" << format_number(*det.gamma);
    if (det.contamination) os << " contamination=" << format_number(*det.contamination);
    os << "\n";
  }
  return os.str();
}

HybridModel to_hybrid_model(const ModelDocument& doc, OutputPlaces outputs) {
  std::vector<ModeLti> modes;
  for (const auto& m : doc.modes) modes.push_back({m.A, m.B, m.C, m.Fx, m.Fy});
  std::vector<GuardPredicate> guards;
  for (const auto& g : doc.guards)
    guards.push_back({g.component, g.cmp, g.threshold, doc.mode_index(g.from), doc.mode_index(g.to)});
  return make_hybrid_model(std::move(modes), std::move(guards), doc.mode_index(doc.initial_mode),
                           doc.initial_state, outputs);
}

std::vector<FaultSpec> to_fault_specs(const ModelDocument& doc) {
  std::vector<FaultSpec> out;
  for (const auto& f : doc.faults) {
    FaultSpec s;
    s.kind = f.kind;
    s.intervals = f.intervals;
    s.magnitude = f.magnitude;
    if (f.kind == FaultKind::ModeBlocking) s.forced_mode = doc.mode_index(f.mode);
    out.push_back(std::move(s));
  }
  return out;
}

ParseResult parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult r;
    r.diagnostics.push_back({0, 0, "cannot open " + path});
    return r;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace etcpn::dsl
