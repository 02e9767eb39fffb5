#include "qmln/logic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace qmln {

FormulaPtr Formula::make_atom(Atom a) {
  auto f = std::make_shared<Formula>();
  f->kind = Connective::Atom;
  f->atom = std::move(a);
  return f;
}

FormulaPtr Formula::make_not(FormulaPtr inner) {
  auto f = std::make_shared<Formula>();
  f->kind = Connective::Not;
  f->lhs = std::move(inner);
  return f;
}

FormulaPtr Formula::make_binary(Connective op, FormulaPtr l, FormulaPtr r) {
  auto f = std::make_shared<Formula>();
  f->kind = op;
  f->lhs = std::move(l);
  f->rhs = std::move(r);
  return f;
}

bool formulas_equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Connective::Atom:
      return a.atom == b.atom;
    case Connective::Not:
      return formulas_equal(*a.lhs, *b.lhs);
    default:
      return formulas_equal(*a.lhs, *b.lhs) && formulas_equal(*a.rhs, *b.rhs);
  }
}

const DomainDecl* KnowledgeBase::find_domain(const std::string& name) const {
  for (const auto& d : domains) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

const PredicateDecl* KnowledgeBase::find_predicate(const std::string& name) const {
  for (const auto& p : predicates) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

int KnowledgeBase::max_domain_size() const {
  int d = 0;
  for (const auto& dom : domains) d = std::max(d, static_cast<int>(dom.constants.size()));
  return d;
}

int KnowledgeBase::max_atoms_per_formula() const {
  int c = 0;
  for (const auto& wf : formulas) {
    c = std::max(c, static_cast<int>(collect_atoms(*wf.formula).size()));
  }
  return c;
}

long KnowledgeBase::num_ground_atoms() const {
  long n = 0;
  for (const auto& p : predicates) {
    long g = 1;
    for (const auto& d : p.argument_domains) {
      const DomainDecl* dom = find_domain(d);
      g *= dom ? static_cast<long>(dom->constants.size()) : 0;
    }
    n += g;
  }
  return n;
}

bool kb_equal(const KnowledgeBase& a, const KnowledgeBase& b) {
  if (a.domains != b.domains || a.predicates != b.predicates) return false;
  if (a.formulas.size() != b.formulas.size()) return false;
  for (std::size_t i = 0; i < a.formulas.size(); ++i) {
    if (a.formulas[i].weight != b.formulas[i].weight) return false;
    if (!formulas_equal(*a.formulas[i].formula, *b.formulas[i].formula)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
  Ident,
  Number,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Equals,
  Bang,
  Caret,
  Implies,
  Iff,
  Newline,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool number_start(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
}

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (text[i + j] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += k;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      out.push_back({Tok::Newline, "\n", line, col});
      bump(1);
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      bump(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') bump(1);
      continue;
    }
    const int tl = line, tc = col;
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      out.push_back({Tok::Ident, text.substr(i, j - i), tl, tc});
      bump(j - i);
      continue;
    }
    if (number_start(c)) {
      std::size_t j = i;
      if (text[j] == '-' || text[j] == '+') ++j;
      bool any = false;
      while (j < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) {
        any = any || text[j] != '.';
        ++j;
      }
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '-' || text[k] == '+')) ++k;
        std::size_t d = k;
        while (d < text.size() && std::isdigit(static_cast<unsigned char>(text[d]))) ++d;
        if (d > k) j = d;
      }
      if (!any) throw ParseError("malformed number", tl, tc);
      out.push_back({Tok::Number, text.substr(i, j - i), tl, tc});
      bump(j - i);
      continue;
    }
    switch (c) {
      case '(':
        out.push_back({Tok::LParen, "(", tl, tc});
        bump(1);
        continue;
      case ')':
        out.push_back({Tok::RParen, ")", tl, tc});
        bump(1);
        continue;
      case '{':
        out.push_back({Tok::LBrace, "{", tl, tc});
        bump(1);
        continue;
      case '}':
        out.push_back({Tok::RBrace, "}", tl, tc});
        bump(1);
        continue;
      case ',':
        out.push_back({Tok::Comma, ",", tl, tc});
        bump(1);
        continue;
      case '!':
        out.push_back({Tok::Bang, "!", tl, tc});
        bump(1);
        continue;
      case '^':
        out.push_back({Tok::Caret, "^", tl, tc});
        bump(1);
        continue;
      case '<':
        if (text.compare(i, 3, "<=>") == 0) {
          out.push_back({Tok::Iff, "<=>", tl, tc});
          bump(3);
          continue;
        }
        throw ParseError("unexpected character '<'", tl, tc);
      case '=':
        if (text.compare(i, 2, "=>") == 0) {
          out.push_back({Tok::Implies, "=>", tl, tc});
          bump(2);
          continue;
        }
        out.push_back({Tok::Equals, "=", tl, tc});
        bump(1);
        continue;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", tl, tc);
    }
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser
// ---------------------------------------------------------------------------

const std::set<std::string> kExistentialWords = {"exist", "Exist", "EXIST",
                                                 "exists", "Exists", "EXISTS"};

// `v` is the OR connective; `domain`/`predicate` introduce statements.
const std::set<std::string> kReservedNames = {"v", "domain", "predicate"};

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

  KnowledgeBase parse() {
    while (!at(Tok::End)) {
      if (at(Tok::Newline)) {
        advance();
        continue;
      }
      if (at(Tok::Ident) && peek().text == "domain") {
        parse_domain();
      } else if (at(Tok::Ident) && peek().text == "predicate") {
        parse_predicate();
      } else if (at(Tok::Number)) {
        parse_weighted_formula();
      } else {
        fail("expected 'domain', 'predicate', or a weighted formula");
      }
      end_of_statement();
    }
    return std::move(kb_);
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  bool at(Tok k) const { return peek().kind == k; }
  void advance() { ++pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().col);
  }

  Token expect(Tok k, const std::string& what) {
    if (!at(k)) fail("expected " + what);
    Token t = peek();
    advance();
    return t;
  }

  void end_of_statement() {
    if (at(Tok::Newline)) {
      advance();
      return;
    }
    if (at(Tok::End)) return;
    fail("unexpected trailing input on statement");
  }

  void parse_domain() {
    advance();  // 'domain'
    Token name = expect(Tok::Ident, "domain name");
    if (kReservedNames.count(name.text)) {
      throw ParseError("'" + name.text + "' is a reserved word", name.line, name.col);
    }
    if (kb_.find_domain(name.text)) {
      throw ParseError("duplicate domain " + name.text, name.line, name.col);
    }
    expect(Tok::Equals, "'='");
    expect(Tok::LBrace, "'{'");
    DomainDecl dom;
    dom.name = name.text;
    std::set<std::string> seen;
    while (true) {
      Token c = expect(Tok::Ident, "constant name");
      if (!seen.insert(c.text).second) {
        throw ParseError("duplicate constant " + c.text + " in domain " + dom.name, c.line,
                         c.col);
      }
      dom.constants.push_back(c.text);
      if (at(Tok::Comma)) {
        advance();
        continue;
      }
      break;
    }
    expect(Tok::RBrace, "'}'");
    kb_.domains.push_back(std::move(dom));
  }

  void parse_predicate() {
    advance();  // 'predicate'
    Token name = expect(Tok::Ident, "predicate name");
    if (kReservedNames.count(name.text)) {
      throw ParseError("'" + name.text + "' is a reserved word", name.line, name.col);
    }
    if (kb_.find_predicate(name.text)) {
      throw ParseError("duplicate predicate " + name.text, name.line, name.col);
    }
    expect(Tok::LParen, "'('");
    PredicateDecl pred;
    pred.name = name.text;
    while (true) {
      Token d = expect(Tok::Ident, "domain name");
      if (!kb_.find_domain(d.text)) {
        throw ParseError("unknown domain " + d.text, d.line, d.col);
      }
      pred.argument_domains.push_back(d.text);
      if (at(Tok::Comma)) {
        advance();
        continue;
      }
      break;
    }
    expect(Tok::RParen, "')'");
    kb_.predicates.push_back(std::move(pred));
  }

  void parse_weighted_formula() {
    Token w = expect(Tok::Number, "weight");
    double weight = 0.0;
    try {
      std::size_t used = 0;
      weight = std::stod(w.text, &used);
      if (used != w.text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("malformed weight '" + w.text + "'", w.line, w.col);
    }
    if (!std::isfinite(weight)) {
      throw ParseError("non-finite weight", w.line, w.col);
    }
    Token start = peek();
    FormulaPtr f = parse_iff();
    validate_formula(*f, start);
    kb_.formulas.push_back(WeightedFormula{std::move(f), weight});
  }

  // iff := implies ('<=>' implies)*        (left associative)
  FormulaPtr parse_iff() {
    FormulaPtr f = parse_implies();
    while (at(Tok::Iff)) {
      advance();
      f = Formula::make_binary(Connective::Iff, f, parse_implies());
    }
    return f;
  }

  // implies := or ('=>' implies)?          (right associative)
  FormulaPtr parse_implies() {
    FormulaPtr f = parse_or();
    if (at(Tok::Implies)) {
      advance();
      return Formula::make_binary(Connective::Implies, f, parse_implies());
    }
    return f;
  }

  bool at_or_keyword() const { return at(Tok::Ident) && peek().text == "v"; }

  FormulaPtr parse_or() {
    FormulaPtr f = parse_and();
    while (at_or_keyword()) {
      advance();
      f = Formula::make_binary(Connective::Or, f, parse_and());
    }
    return f;
  }

  FormulaPtr parse_and() {
    FormulaPtr f = parse_unary();
    while (at(Tok::Caret)) {
      advance();
      f = Formula::make_binary(Connective::And, f, parse_unary());
    }
    return f;
  }

  FormulaPtr parse_unary() {
    if (at(Tok::Bang)) {
      advance();
      return Formula::make_not(parse_unary());
    }
    if (at(Tok::LParen)) {
      advance();
      FormulaPtr f = parse_iff();
      expect(Tok::RParen, "')'");
      return f;
    }
    if (at(Tok::Ident)) {
      if (kExistentialWords.count(peek().text)) {
        fail("existential quantifiers are not supported");
      }
      return parse_atom();
    }
    fail("expected an atom, '!' or '('");
  }

  FormulaPtr parse_atom() {
    Token name = expect(Tok::Ident, "predicate name");
    const PredicateDecl* pred = kb_.find_predicate(name.text);
    if (!pred) {
      throw ParseError("unknown predicate " + name.text, name.line, name.col);
    }
    expect(Tok::LParen, "'('");
    Atom atom;
    atom.predicate = name.text;
    int pos = 0;
    while (true) {
      Token t = expect(Tok::Ident, "term");
      if (pos >= pred->arity()) {
        throw ParseError("arity mismatch for predicate " + pred->name, t.line, t.col);
      }
      const DomainDecl* dom = kb_.find_domain(pred->argument_domains[pos]);
      const bool in_this_domain =
          std::find(dom->constants.begin(), dom->constants.end(), t.text) !=
          dom->constants.end();
      bool is_constant_somewhere = false;
      for (const auto& d : kb_.domains) {
        if (std::find(d.constants.begin(), d.constants.end(), t.text) != d.constants.end()) {
          is_constant_somewhere = true;
          break;
        }
      }
      if (in_this_domain) {
        atom.args.push_back(Term::constant(t.text));
      } else if (is_constant_somewhere) {
        throw ParseError("constant " + t.text + " is not in domain " +
                             pred->argument_domains[pos],
                         t.line, t.col);
      } else {
        atom.args.push_back(Term::variable(t.text));
      }
      ++pos;
      if (at(Tok::Comma)) {
        advance();
        continue;
      }
      break;
    }
    Token close = expect(Tok::RParen, "')'");
    if (pos != pred->arity()) {
      throw ParseError("arity mismatch for predicate " + pred->name, close.line, close.col);
    }
    return Formula::make_atom(std::move(atom));
  }

  // Per-formula check that each variable has one consistent domain.
  void validate_formula(const Formula& f, const Token& where) {
    std::map<std::string, std::string> var_domain;
    for (const Atom& atom : collect_atoms(f)) {
      const PredicateDecl* pred = kb_.find_predicate(atom.predicate);
      for (std::size_t i = 0; i < atom.args.size(); ++i) {
        if (!atom.args[i].is_variable()) continue;
        const std::string& dom = pred->argument_domains[i];
        auto [it, inserted] = var_domain.emplace(atom.args[i].name, dom);
        if (!inserted && it->second != dom) {
          throw ParseError("variable " + atom.args[i].name + " used with domains " +
                               it->second + " and " + dom,
                           where.line, where.col);
        }
      }
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  KnowledgeBase kb_;
};

int precedence(Connective c) {
  switch (c) {
    case Connective::Iff:
      return 1;
    case Connective::Implies:
      return 2;
    case Connective::Or:
      return 3;
    case Connective::And:
      return 4;
    case Connective::Not:
      return 5;
    case Connective::Atom:
      return 6;
  }
  return 6;
}

void render_formula(const Formula& f, int min_prec, std::string& out) {
  const int prec = precedence(f.kind);
  const bool parens = prec < min_prec;
  if (parens) out += '(';
  switch (f.kind) {
    case Connective::Atom:
      out += render(f.atom);
      break;
    case Connective::Not:
      out += '!';
      render_formula(*f.lhs, precedence(Connective::Not), out);
      break;
    case Connective::And:
      render_formula(*f.lhs, prec, out);
      out += " ^ ";
      render_formula(*f.rhs, prec + 1, out);
      break;
    case Connective::Or:
      render_formula(*f.lhs, prec, out);
      out += " v ";
      render_formula(*f.rhs, prec + 1, out);
      break;
    case Connective::Implies:
      render_formula(*f.lhs, prec + 1, out);  // right associative
      out += " => ";
      render_formula(*f.rhs, prec, out);
      break;
    case Connective::Iff:
      render_formula(*f.lhs, prec, out);
      out += " <=> ";
      render_formula(*f.rhs, prec + 1, out);
      break;
  }
  if (parens) out += ')';
}

std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

}  // namespace

KnowledgeBase parse_kb(const std::string& text) { return Parser(text).parse(); }

std::string render(const Atom& atom) {
  std::string out = atom.predicate;
  out += '(';
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    if (i) out += ',';
    out += atom.args[i].name;
  }
  out += ')';
  return out;
}

std::string render(const Formula& formula) {
  std::string out;
  render_formula(formula, 0, out);
  return out;
}

std::string render(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& d : kb.domains) {
    out += "domain " + d.name + " = { ";
    for (std::size_t i = 0; i < d.constants.size(); ++i) {
      if (i) out += ", ";
      out += d.constants[i];
    }
    out += " }\n";
  }
  for (const auto& p : kb.predicates) {
    out += "predicate " + p.name + "(";
    for (std::size_t i = 0; i < p.argument_domains.size(); ++i) {
      if (i) out += ", ";
      out += p.argument_domains[i];
    }
    out += ")\n";
  }
  for (const auto& wf : kb.formulas) {
    out += format_weight(wf.weight) + " " + render(*wf.formula) + "\n";
  }
  return out;
}

FormulaPtr substitute(const FormulaPtr& formula, const Binding& binding) {
  switch (formula->kind) {
    case Connective::Atom: {
      Atom atom = formula->atom;
      bool changed = false;
      for (auto& arg : atom.args) {
        if (!arg.is_variable()) continue;
        auto it = binding.find(arg.name);
        if (it != binding.end()) {
          arg = Term::constant(it->second);
          changed = true;
        }
      }
      return changed ? Formula::make_atom(std::move(atom)) : formula;
    }
    case Connective::Not: {
      FormulaPtr inner = substitute(formula->lhs, binding);
      return inner == formula->lhs ? formula : Formula::make_not(std::move(inner));
    }
    default: {
      FormulaPtr l = substitute(formula->lhs, binding);
      FormulaPtr r = substitute(formula->rhs, binding);
      if (l == formula->lhs && r == formula->rhs) return formula;
      return Formula::make_binary(formula->kind, std::move(l), std::move(r));
    }
  }
}

std::vector<Atom> collect_atoms(const Formula& formula) {
  std::vector<Atom> atoms;
  std::function<void(const Formula&)> walk = [&](const Formula& f) {
    if (f.kind == Connective::Atom) {
      if (std::find(atoms.begin(), atoms.end(), f.atom) == atoms.end()) {
        atoms.push_back(f.atom);
      }
      return;
    }
    walk(*f.lhs);
    if (f.rhs) walk(*f.rhs);
  };
  walk(formula);
  return atoms;
}

std::vector<std::pair<std::string, std::string>> free_variables(const KnowledgeBase& kb,
                                                                const Formula& formula) {
  std::vector<std::pair<std::string, std::string>> out;
  std::function<void(const Formula&)> walk = [&](const Formula& f) {
    if (f.kind == Connective::Atom) {
      const PredicateDecl* pred = kb.find_predicate(f.atom.predicate);
      if (!pred) throw ModelError("unknown predicate " + f.atom.predicate);
      if (pred->arity() != static_cast<int>(f.atom.args.size())) {
        throw ModelError("arity mismatch for predicate " + f.atom.predicate);
      }
      for (std::size_t i = 0; i < f.atom.args.size(); ++i) {
        if (!f.atom.args[i].is_variable()) continue;
        const std::string& var = f.atom.args[i].name;
        const std::string& dom = pred->argument_domains[i];
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& p) { return p.first == var; });
        if (it == out.end()) {
          out.emplace_back(var, dom);
        } else if (it->second != dom) {
          throw ModelError("variable " + var + " used with domains " + it->second + " and " +
                           dom);
        }
      }
      return;
    }
    walk(*f.lhs);
    if (f.rhs) walk(*f.rhs);
  };
  walk(formula);
  return out;
}

FormulaPtr rename_variables(const FormulaPtr& formula,
                            const std::map<std::string, std::string>& renaming) {
  switch (formula->kind) {
    case Connective::Atom: {
      Atom atom = formula->atom;
      bool changed = false;
      for (auto& arg : atom.args) {
        if (!arg.is_variable()) continue;
        auto it = renaming.find(arg.name);
        if (it != renaming.end() && it->second != arg.name) {
          arg.name = it->second;
          changed = true;
        }
      }
      return changed ? Formula::make_atom(std::move(atom)) : formula;
    }
    case Connective::Not: {
      FormulaPtr inner = rename_variables(formula->lhs, renaming);
      return inner == formula->lhs ? formula : Formula::make_not(std::move(inner));
    }
    default: {
      FormulaPtr l = rename_variables(formula->lhs, renaming);
      FormulaPtr r = rename_variables(formula->rhs, renaming);
      if (l == formula->lhs && r == formula->rhs) return formula;
      return Formula::make_binary(formula->kind, std::move(l), std::move(r));
    }
  }
}

bool contains_predicate(const Formula& formula, const std::string& predicate) {
  if (formula.kind == Connective::Atom) return formula.atom.predicate == predicate;
  if (contains_predicate(*formula.lhs, predicate)) return true;
  return formula.rhs && contains_predicate(*formula.rhs, predicate);
}

PartialValue partial_evaluate(
    const FormulaPtr& formula,
    const std::function<std::optional<bool>(const Atom&)>& value) {
  switch (formula->kind) {
    case Connective::Atom: {
      if (auto v = value(formula->atom)) return *v;
      return formula;
    }
    case Connective::Not: {
      PartialValue inner = partial_evaluate(formula->lhs, value);
      if (auto* b = std::get_if<bool>(&inner)) return !*b;
      FormulaPtr f = std::get<FormulaPtr>(inner);
      return f == formula->lhs ? formula : Formula::make_not(std::move(f));
    }
    default: {
      PartialValue lv = partial_evaluate(formula->lhs, value);
      PartialValue rv = partial_evaluate(formula->rhs, value);
      const bool* lb = std::get_if<bool>(&lv);
      const bool* rb = std::get_if<bool>(&rv);
      switch (formula->kind) {
        case Connective::And:
          if (lb && !*lb) return false;
          if (rb && !*rb) return false;
          if (lb && rb) return true;
          if (lb) return std::get<FormulaPtr>(rv);
          if (rb) return std::get<FormulaPtr>(lv);
          break;
        case Connective::Or:
          if (lb && *lb) return true;
          if (rb && *rb) return true;
          if (lb && rb) return false;
          if (lb) return std::get<FormulaPtr>(rv);
          if (rb) return std::get<FormulaPtr>(lv);
          break;
        case Connective::Implies:
          if (lb && !*lb) return true;
          if (rb && *rb) return true;
          if (lb && rb) return *rb;  // true => rb
          if (lb) return std::get<FormulaPtr>(rv);
          if (rb) return Formula::make_not(std::get<FormulaPtr>(lv));  // lhs => false
          break;
        case Connective::Iff:
          if (lb && rb) return *lb == *rb;
          if (lb) {
            FormulaPtr r = std::get<FormulaPtr>(rv);
            return *lb ? PartialValue{r} : PartialValue{Formula::make_not(std::move(r))};
          }
          if (rb) {
            FormulaPtr l = std::get<FormulaPtr>(lv);
            return *rb ? PartialValue{l} : PartialValue{Formula::make_not(std::move(l))};
          }
          break;
        default:
          break;
      }
      FormulaPtr l = std::get<FormulaPtr>(lv);
      FormulaPtr r = std::get<FormulaPtr>(rv);
      if (l == formula->lhs && r == formula->rhs) return formula;
      return Formula::make_binary(formula->kind, std::move(l), std::move(r));
    }
  }
}

}  // namespace qmln
