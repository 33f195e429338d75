#include "ccmon/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>

namespace ccmon {

ParseError::ParseError(const std::string& message, std::size_t position)
    : Error(message + " at position " + std::to_string(position)), position_(position) {}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::True: return "True";
    case Verdict::False: return "False";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

struct Formula::Node {
  Kind kind;
  std::string name;
  Cost bound = 0;
  Formula lhs;
  Formula rhs;
  std::size_t hash = 0;
};

namespace {

std::size_t mix(std::size_t h, std::size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

}  // namespace

Formula::Formula() : node_(nullptr) {}

Formula::Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Formula Formula::build(Kind k, std::string name, Cost bound, Formula lhs, Formula rhs) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->name = std::move(name);
  n->bound = bound;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  std::size_t h = static_cast<std::size_t>(k) * 1000003ULL;
  h = mix(h, std::hash<std::string>{}(n->name));
  h = mix(h, static_cast<std::size_t>(n->bound));
  h = mix(h, n->lhs.hash());
  h = mix(h, n->rhs.hash());
  n->hash = h;
  return Formula(std::shared_ptr<const Node>(std::move(n)));
}

Formula Formula::top() { return Formula(); }

Formula Formula::bottom() {
  static const Formula f = build(Kind::False, "", 0, Formula(), Formula());
  return f;
}

Formula Formula::atom(std::string name) {
  if (name.empty()) throw Error("empty proposition name");
  return build(Kind::Atom, std::move(name), 0, Formula(), Formula());
}

Formula Formula::negation(Formula f) { return build(Kind::Not, "", 0, std::move(f), Formula()); }
Formula Formula::conj(Formula a, Formula b) { return build(Kind::And, "", 0, std::move(a), std::move(b)); }
Formula Formula::disj(Formula a, Formula b) { return build(Kind::Or, "", 0, std::move(a), std::move(b)); }
Formula Formula::next(Formula f) { return build(Kind::Next, "", 0, std::move(f), Formula()); }
Formula Formula::eventually(Formula f) { return build(Kind::Eventually, "", 0, std::move(f), Formula()); }
Formula Formula::globally(Formula f) { return build(Kind::Globally, "", 0, std::move(f), Formula()); }
Formula Formula::until(Formula a, Formula b) { return build(Kind::Until, "", 0, std::move(a), std::move(b)); }

Formula Formula::qdep(Formula lhs, Formula rhs, Cost bound) {
  if (bound < 0) throw Error("quantitative dependency bound must be non-negative");
  return build(Kind::QDep, "", bound, std::move(lhs), std::move(rhs));
}

Formula Formula::budget(Formula rhs, Cost remaining) {
  return build(Kind::Budget, "", remaining, std::move(rhs), Formula());
}

Kind Formula::kind() const noexcept { return node_ ? node_->kind : Kind::True; }

const std::string& Formula::name() const noexcept {
  static const std::string empty;
  return node_ ? node_->name : empty;
}

Cost Formula::bound() const noexcept { return node_ ? node_->bound : 0; }

const Formula& Formula::lhs() const {
  if (!node_) throw Error("constant formula has no operands");
  return node_->lhs;
}

const Formula& Formula::rhs() const {
  if (!node_) throw Error("constant formula has no operands");
  return node_->rhs;
}

std::size_t Formula::hash() const noexcept { return node_ ? node_->hash : 0x51ed2701ULL; }

bool operator==(const Formula& a, const Formula& b) noexcept {
  if (a.node_ == b.node_) return true;
  if (a.hash() != b.hash() || a.kind() != b.kind()) return false;
  if (!a.node_ || !b.node_) return false;
  return a.node_->name == b.node_->name && a.node_->bound == b.node_->bound &&
         a.node_->lhs == b.node_->lhs && a.node_->rhs == b.node_->rhs;
}

bool operator<(const Formula& a, const Formula& b) noexcept {
  if (a.node_ == b.node_) return false;
  if (a.kind() != b.kind()) return a.kind() < b.kind();
  if (!a.node_ || !b.node_) return !a.node_ && b.node_;
  if (a.node_->name != b.node_->name) return a.node_->name < b.node_->name;
  if (a.node_->bound != b.node_->bound) return a.node_->bound < b.node_->bound;
  if (a.node_->lhs != b.node_->lhs) return a.node_->lhs < b.node_->lhs;
  return a.node_->rhs < b.node_->rhs;
}

// ---------------------------------------------------------------------------
// Parser
//
//   expr    := or ('U' expr)?
//   or      := and ('|' and)*
//   and     := unary ('&' unary)*
//   unary   := ('!' | 'X' | 'F' | 'G') unary | primary
//   primary := 'true' | 'false' | ident | '(' expr ')' | '(' expr 'o<=' NUM expr ')'

namespace {

enum class Tok { End, Ident, True, False, Not, And, Or, Next, Ev, Glob, Until, LParen, RParen, QDep };

struct Token {
  Tok type;
  std::string text;
  std::size_t pos;
  Cost bound = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      if (i_ >= s_.size()) {
        out.push_back({Tok::End, "", i_});
        return out;
      }
      const std::size_t start = i_;
      const char c = s_[i_];
      if (c == 'o' && s_.substr(i_, 3) == "o<=") {
        i_ += 3;
        out.push_back(quantitative(start));
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (i_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
          ++i_;
        std::string word(s_.substr(start, i_ - start));
        out.push_back({keyword(word), word, start});
        continue;
      }
      ++i_;
      switch (c) {
        case '!': out.push_back({Tok::Not, "!", start}); break;
        case '&': out.push_back({Tok::And, "&", start}); break;
        case '|': out.push_back({Tok::Or, "|", start}); break;
        case '(': out.push_back({Tok::LParen, "(", start}); break;
        case ')': out.push_back({Tok::RParen, ")", start}); break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", start);
      }
    }
  }

 private:
  static Tok keyword(const std::string& w) {
    if (w == "true") return Tok::True;
    if (w == "false") return Tok::False;
    if (w == "X") return Tok::Next;
    if (w == "F") return Tok::Ev;
    if (w == "G") return Tok::Glob;
    if (w == "U") return Tok::Until;
    return Tok::Ident;
  }

  Token quantitative(std::size_t start) {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == '-') throw ParseError("negative cost bound", i_);
    const std::size_t num_start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (num_start == i_) throw ParseError("expected non-negative integer bound after 'o<='", i_);
    if (i_ < s_.size() && (s_[i_] == '.' || s_[i_] == 'e' || s_[i_] == 'E'))
      throw ParseError("cost bound must be an integer", i_);
    Cost value = 0;
    const auto digits = s_.substr(num_start, i_ - num_start);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc()) throw ParseError("cost bound out of range", num_start);
    Token t{Tok::QDep, "o<=", start};
    t.bound = value;
    return t;
  }

  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Formula parse() {
    Formula f = expr();
    if (peek().type != Tok::End) throw ParseError("unexpected '" + peek().text + "'", peek().pos);
    return f;
  }

 private:
  const Token& peek() const { return toks_[k_]; }
  const Token& take() { return toks_[k_++]; }

  Formula expr() {
    Formula lhs = disjunction();
    if (peek().type == Tok::Until) {
      take();
      return Formula::until(lhs, expr());
    }
    return lhs;
  }

  Formula disjunction() {
    Formula f = conjunction();
    while (peek().type == Tok::Or) {
      take();
      f = Formula::disj(f, conjunction());
    }
    return f;
  }

  Formula conjunction() {
    Formula f = unary();
    while (peek().type == Tok::And) {
      take();
      f = Formula::conj(f, unary());
    }
    return f;
  }

  Formula unary() {
    switch (peek().type) {
      case Tok::Not: take(); return Formula::negation(unary());
      case Tok::Next: take(); return Formula::next(unary());
      case Tok::Ev: take(); return Formula::eventually(unary());
      case Tok::Glob: take(); return Formula::globally(unary());
      default: return primary();
    }
  }

  Formula primary() {
    const Token& t = take();
    switch (t.type) {
      case Tok::True: return Formula::top();
      case Tok::False: return Formula::bottom();
      case Tok::Ident: return Formula::atom(t.text);
      case Tok::LParen: {
        Formula inner = expr();
        if (peek().type == Tok::QDep) {
          const Cost bound = take().bound;
          Formula rhs = expr();
          expect_close(t.pos);
          return Formula::qdep(inner, rhs, bound);
        }
        expect_close(t.pos);
        return inner;
      }
      case Tok::End: throw ParseError("unexpected end of input", t.pos);
      default: throw ParseError("unexpected '" + t.text + "'", t.pos);
    }
  }

  void expect_close(std::size_t open_pos) {
    if (peek().type == Tok::RParen) {
      take();
      return;
    }
    if (peek().type == Tok::End)
      throw ParseError("unexpected end of input, '(' at " + std::to_string(open_pos) + " is not closed",
                       peek().pos);
    throw ParseError("expected ')'", peek().pos);
  }

  std::vector<Token> toks_;
  std::size_t k_ = 0;
};

// Binding strength for rendering; larger binds tighter.
int precedence(const Formula& f) {
  switch (f.kind()) {
    case Kind::Until: return 1;
    case Kind::Or: return 2;
    case Kind::And: return 3;
    case Kind::Not:
    case Kind::Next:
    case Kind::Eventually:
    case Kind::Globally: return 4;
    default: return 5;
  }
}

void render_into(const Formula& f, std::string& out);

void render_operand(const Formula& f, bool parens, std::string& out) {
  if (parens) out += '(';
  render_into(f, out);
  if (parens) out += ')';
}

void render_into(const Formula& f, std::string& out) {
  switch (f.kind()) {
    case Kind::True: out += "true"; return;
    case Kind::False: out += "false"; return;
    case Kind::Atom: out += f.name(); return;
    case Kind::Not:
    case Kind::Next:
    case Kind::Eventually:
    case Kind::Globally: {
      const char* op = f.is(Kind::Not) ? "!" : f.is(Kind::Next) ? "X " : f.is(Kind::Eventually) ? "F " : "G ";
      out += op;
      render_operand(f.lhs(), precedence(f.lhs()) < 4, out);
      return;
    }
    case Kind::And:
    case Kind::Or: {
      const int p = precedence(f);
      render_operand(f.lhs(), precedence(f.lhs()) < p, out);
      out += f.is(Kind::And) ? " & " : " | ";
      render_operand(f.rhs(), precedence(f.rhs()) <= p, out);
      return;
    }
    case Kind::Until:
      render_operand(f.lhs(), precedence(f.lhs()) <= 1, out);
      out += " U ";
      render_operand(f.rhs(), precedence(f.rhs()) < 1, out);
      return;
    case Kind::QDep:
      out += '(';
      render_operand(f.lhs(), precedence(f.lhs()) < 4, out);
      out += " o<=" + std::to_string(f.bound()) + " ";
      render_operand(f.rhs(), precedence(f.rhs()) < 4, out);
      out += ')';
      return;
    case Kind::Budget:
      out += "B[" + std::to_string(f.bound()) + "](";
      render_into(f.lhs(), out);
      out += ')';
      return;
  }
}

}  // namespace

Formula parse_formula(std::string_view text) { return Parser(Lexer(text).run()).parse(); }

std::string render_formula(const Formula& f) {
  std::string out;
  render_into(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Negation normal form

namespace {

Formula nnf(const Formula& f, bool neg) {
  switch (f.kind()) {
    case Kind::True: return neg ? Formula::bottom() : f;
    case Kind::False: return neg ? Formula::top() : f;
    case Kind::Atom: return neg ? Formula::negation(f) : f;
    case Kind::Not: return nnf(f.lhs(), !neg);
    case Kind::And:
      return neg ? Formula::disj(nnf(f.lhs(), true), nnf(f.rhs(), true))
                 : Formula::conj(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case Kind::Or:
      return neg ? Formula::conj(nnf(f.lhs(), true), nnf(f.rhs(), true))
                 : Formula::disj(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case Kind::Next: return Formula::next(nnf(f.lhs(), neg));
    case Kind::Eventually:
      return neg ? Formula::globally(nnf(f.lhs(), true)) : Formula::eventually(nnf(f.lhs(), false));
    case Kind::Globally:
      return neg ? Formula::eventually(nnf(f.lhs(), true)) : Formula::globally(nnf(f.lhs(), false));
    case Kind::Until: {
      if (!neg) return Formula::until(nnf(f.lhs(), false), nnf(f.rhs(), false));
      // !(a U b) == (!b U (!a & !b)) | G !b
      Formula na = nnf(f.lhs(), true);
      Formula nb = nnf(f.rhs(), true);
      return Formula::disj(Formula::until(nb, Formula::conj(na, nb)), Formula::globally(nb));
    }
    case Kind::QDep: {
      Formula q = Formula::qdep(nnf(f.lhs(), false), nnf(f.rhs(), false), f.bound());
      return neg ? Formula::negation(q) : q;
    }
    case Kind::Budget: {
      Formula b = Formula::budget(nnf(f.lhs(), false), f.bound());
      return neg ? Formula::negation(b) : b;
    }
  }
  return f;
}

}  // namespace

Formula negate(const Formula& f) { return nnf(f, true); }
Formula normalize(const Formula& f) { return nnf(f, false); }

bool is_nnf(const Formula& f) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::False:
    case Kind::Atom: return true;
    case Kind::Not: {
      const Kind k = f.lhs().kind();
      if (k == Kind::Atom) return true;
      if (k == Kind::QDep || k == Kind::Budget) return is_nnf(f.lhs());
      return false;
    }
    case Kind::And:
    case Kind::Or:
    case Kind::Until: return is_nnf(f.lhs()) && is_nnf(f.rhs());
    case Kind::QDep: return is_nnf(f.lhs()) && is_nnf(f.rhs());
    default: return is_nnf(f.lhs());
  }
}

namespace {

void collect_atoms(const Formula& f, std::set<std::string>& out) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::False: return;
    case Kind::Atom: out.insert(f.name()); return;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::QDep:
      collect_atoms(f.lhs(), out);
      collect_atoms(f.rhs(), out);
      return;
    default: collect_atoms(f.lhs(), out); return;
  }
}

}  // namespace

std::set<std::string> atoms(const Formula& f) {
  std::set<std::string> out;
  collect_atoms(f, out);
  return out;
}

std::vector<Formula> flatten(const Formula& f, Kind connective) {
  std::vector<Formula> out;
  std::vector<Formula> stack{f};
  while (!stack.empty()) {
    Formula g = stack.back();
    stack.pop_back();
    if (g.kind() == connective) {
      stack.push_back(g.rhs());
      stack.push_back(g.lhs());
    } else {
      out.push_back(g);
    }
  }
  return out;
}

Formula make_chain(const std::vector<Formula>& parts, Kind connective) {
  if (parts.empty()) return connective == Kind::And ? Formula::top() : Formula::bottom();
  Formula f = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i)
    f = connective == Kind::And ? Formula::conj(f, parts[i]) : Formula::disj(f, parts[i]);
  return f;
}

namespace {

Formula simplify_chain(const Formula& a, const Formula& b, Kind connective) {
  const Kind absorbing = connective == Kind::And ? Kind::False : Kind::True;
  const Kind neutral = connective == Kind::And ? Kind::True : Kind::False;
  if (a.is(absorbing)) return a;
  if (b.is(absorbing)) return b;
  if (a.is(neutral)) return b;
  if (b.is(neutral)) return a;
  if (a == b) return a;
  std::vector<Formula> parts = flatten(a, connective);
  for (const Formula& g : flatten(b, connective))
    if (std::find(parts.begin(), parts.end(), g) == parts.end()) parts.push_back(g);
  return make_chain(parts, connective);
}

}  // namespace

Formula simplify_and(const Formula& a, const Formula& b) { return simplify_chain(a, b, Kind::And); }
Formula simplify_or(const Formula& a, const Formula& b) { return simplify_chain(a, b, Kind::Or); }

// ---------------------------------------------------------------------------
// Progression

std::vector<Cost> Trace::cumulative() const {
  std::vector<Cost> d;
  d.reserve(events.size());
  Cost sum = 0;
  for (const Event& e : events) {
    sum += e.cost;
    d.push_back(sum);
  }
  return d;
}

namespace {

struct Progressor {
  const Event& e;
  const ProgressOptions& opt;

  Formula continuation(const Formula& target, Cost remaining) const {
    if (remaining - opt.min_event_cost < 0) return Formula::bottom();
    return Formula::budget(target, remaining);
  }

  Cost activation_offset(const Formula& lhs) const {
    if (e.age.empty()) return 0;
    Cost offset = 0;
    for (const std::string& a : atoms(lhs)) {
      auto it = e.age.find(a);
      if (it != e.age.end()) offset = std::max(offset, it->second);
    }
    return offset;
  }

  Formula step(const Formula& f) const {
    switch (f.kind()) {
      case Kind::True:
      case Kind::False: return f;
      case Kind::Atom: return e.holds(f.name()) ? Formula::top() : Formula::bottom();
      case Kind::Not: return negate(step(f.lhs()));
      case Kind::And: {
        Formula a = step(f.lhs());
        if (a.is(Kind::False)) return a;
        return simplify_and(a, step(f.rhs()));
      }
      case Kind::Or: {
        Formula a = step(f.lhs());
        if (a.is(Kind::True)) return a;
        return simplify_or(a, step(f.rhs()));
      }
      case Kind::Next: return f.lhs();
      case Kind::Eventually: return simplify_or(step(f.lhs()), f);
      case Kind::Globally: return simplify_and(step(f.lhs()), f);
      case Kind::Until: return simplify_or(step(f.rhs()), simplify_and(step(f.lhs()), f));
      case Kind::QDep: {
        Formula trigger = step(f.lhs());
        if (trigger.is(Kind::False)) return Formula::top();
        const Cost remaining = f.bound() - activation_offset(f.lhs());
        Formula obligation = remaining < 0
                                 ? Formula::bottom()
                                 : simplify_or(step(f.rhs()), continuation(f.rhs(), remaining));
        if (trigger.is(Kind::True)) return obligation;
        return simplify_or(negate(trigger), obligation);
      }
      case Kind::Budget: {
        const Cost remaining = f.bound() - e.cost;
        if (remaining < 0) return Formula::bottom();
        return simplify_or(step(f.lhs()), continuation(f.lhs(), remaining));
      }
    }
    return f;
  }
};

}  // namespace

Formula progress(const Formula& f, const Event& e, Cost /*d_before*/, const ProgressOptions& options) {
  return Progressor{e, options}.step(f);
}

Evaluation evaluate(const Formula& f, const Trace& t, const ProgressOptions& options) {
  Evaluation ev;
  ev.residual = normalize(f);
  Cost d = 0;
  for (std::size_t k = 0; k < t.events.size(); ++k) {
    if (ev.residual.is_constant()) break;
    ev.residual = progress(ev.residual, t.events[k], d, options);
    d += t.events[k].cost;
    if (ev.residual.is_constant()) ev.decided_at = k;
  }
  if (ev.residual.is(Kind::True)) ev.verdict = Verdict::True;
  else if (ev.residual.is(Kind::False)) ev.verdict = Verdict::False;
  return ev;
}

Verdict evaluate_trace(const Formula& f, const Trace& t, const ProgressOptions& options) {
  return evaluate(f, t, options).verdict;
}

// ---------------------------------------------------------------------------

SubformulaIndex::SubformulaIndex(const Formula& root) { extend(root); }

void SubformulaIndex::extend(const Formula& root) {
  std::vector<Formula> stack{root};
  while (!stack.empty()) {
    Formula f = stack.back();
    stack.pop_back();
    if (lookup_.count(f)) continue;
    lookup_.emplace(f, entries_.size());
    entries_.push_back(f);
    switch (f.kind()) {
      case Kind::True:
      case Kind::False:
      case Kind::Atom: break;
      case Kind::And:
      case Kind::Or:
      case Kind::Until:
      case Kind::QDep:
        stack.push_back(f.rhs());
        stack.push_back(f.lhs());
        break;
      default: stack.push_back(f.lhs()); break;
    }
  }
}

std::optional<std::size_t> SubformulaIndex::find(const Formula& f) const {
  auto it = lookup_.find(f);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t SubformulaIndex::at(const Formula& f) const {
  auto idx = find(f);
  if (!idx) throw Error("formula not indexed: " + render_formula(f));
  return *idx;
}

const Formula& SubformulaIndex::formula(std::size_t idx) const {
  if (idx >= entries_.size()) throw Error("unknown sub-formula index " + std::to_string(idx));
  return entries_[idx];
}

}  // namespace ccmon
