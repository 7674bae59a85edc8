#pragma once

#include <map>
#include <string>
#include <vector>

#include "sitebt/errors.hpp"
#include "sitebt/flags.hpp"

namespace sitebt {

/// Boolean expression over (flag, expected-value) pairs. Internal nodes are
/// And / Or; the empty conjunction is the always-true expression.
struct FlagExpr {
    enum class Kind { Leaf, And, Or };

    Kind kind = Kind::And;
    FlagName flag;          // Leaf only
    bool expected = true;   // Leaf only
    std::vector<FlagExpr> children;

    static FlagExpr always_true() { return FlagExpr{}; }

    static FlagExpr leaf(FlagName name, bool expected) {
        FlagExpr e;
        e.kind = Kind::Leaf;
        e.flag = std::move(name);
        e.expected = expected;
        return e;
    }

    static FlagExpr all_of(std::vector<FlagExpr> terms) {
        if (terms.size() == 1) return std::move(terms.front());
        FlagExpr e;
        e.kind = Kind::And;
        e.children = std::move(terms);
        return e;
    }

    static FlagExpr any_of(std::vector<FlagExpr> terms) {
        if (terms.size() == 1) return std::move(terms.front());
        FlagExpr e;
        e.kind = Kind::Or;
        e.children = std::move(terms);
        return e;
    }

    bool is_always_true() const { return kind == Kind::And && children.empty(); }

    friend bool operator==(const FlagExpr& a, const FlagExpr& b) {
        if (a.kind != b.kind) return false;
        if (a.kind == Kind::Leaf) return a.flag == b.flag && a.expected == b.expected;
        return a.children == b.children;
    }
};

inline bool eval_expr(const FlagExpr& expr, const std::map<FlagName, bool>& snapshot) {
    switch (expr.kind) {
        case FlagExpr::Kind::Leaf: {
            auto it = snapshot.find(expr.flag);
            if (it == snapshot.end()) throw MissingFlagError(expr.flag);
            return it->second == expr.expected;
        }
        case FlagExpr::Kind::And:
            for (const auto& c : expr.children)
                if (!eval_expr(c, snapshot)) return false;
            return true;
        case FlagExpr::Kind::Or:
            for (const auto& c : expr.children)
                if (eval_expr(c, snapshot)) return true;
            return false;
    }
    return false;
}

/// Leaves in expression order, left to right. Duplicate flags kept.
inline void collect_leaves(const FlagExpr& expr, std::vector<const FlagExpr*>& out) {
    if (expr.kind == FlagExpr::Kind::Leaf) {
        out.push_back(&expr);
        return;
    }
    for (const auto& c : expr.children) collect_leaves(c, out);
}

inline std::vector<const FlagExpr*> leaves_in_order(const FlagExpr& expr) {
    std::vector<const FlagExpr*> out;
    collect_leaves(expr, out);
    return out;
}

/// Text spelling for an expression. The DSL uses `and` / `or` / `==`; the XML
/// attribute dialect uses `&&` / `||` / `==`. Parentheses appear only where an
/// Or sits under an And (`and` binds tighter).
enum class ExprSpelling { Dsl, Xml };

inline std::string expr_to_string(const FlagExpr& expr, ExprSpelling spelling) {
    const char* and_op = spelling == ExprSpelling::Dsl ? " and " : " && ";
    const char* or_op = spelling == ExprSpelling::Dsl ? " or " : " || ";
    switch (expr.kind) {
        case FlagExpr::Kind::Leaf:
            return expr.flag + "==" + (expr.expected ? "true" : "false");
        case FlagExpr::Kind::And: {
            std::string out;
            for (std::size_t i = 0; i < expr.children.size(); ++i) {
                if (i) out += and_op;
                const auto& c = expr.children[i];
                if (c.kind == FlagExpr::Kind::Or)
                    out += "(" + expr_to_string(c, spelling) + ")";
                else
                    out += expr_to_string(c, spelling);
            }
            return out;
        }
        case FlagExpr::Kind::Or: {
            std::string out;
            for (std::size_t i = 0; i < expr.children.size(); ++i) {
                if (i) out += or_op;
                out += expr_to_string(expr.children[i], spelling);
            }
            return out;
        }
    }
    return {};
}

namespace detail {

// Recursive-descent parser shared by the DSL and the XML attribute dialect:
//   expr := term (OR term)*
//   term := atom (AND atom)*
//   atom := FLAG == true|false | ( expr )
class ExprParser {
public:
    ExprParser(const std::string& text, ExprSpelling spelling, int line, int column_base)
        : text_(text), spelling_(spelling), line_(line), column_base_(column_base) {}

    FlagExpr parse() {
        skip_ws();
        if (at_end()) throw err("flag expression");
        FlagExpr e = parse_or();
        skip_ws();
        if (!at_end()) throw err("end of expression");
        return e;
    }

private:
    FlagExpr parse_or() {
        std::vector<FlagExpr> terms;
        terms.push_back(parse_and());
        while (accept_op(false)) terms.push_back(parse_and());
        return FlagExpr::any_of(std::move(terms));
    }

    FlagExpr parse_and() {
        std::vector<FlagExpr> atoms;
        atoms.push_back(parse_atom());
        while (accept_op(true)) atoms.push_back(parse_atom());
        return FlagExpr::all_of(std::move(atoms));
    }

    FlagExpr parse_atom() {
        skip_ws();
        if (peek() == '(') {
            ++pos_;
            FlagExpr inner = parse_or();
            skip_ws();
            if (peek() != ')') throw err("')'");
            ++pos_;
            return inner;
        }
        std::string name = read_flag_name();
        skip_ws();
        if (!(peek() == '=' && peek(1) == '=')) throw err("'=='");
        pos_ += 2;
        skip_ws();
        bool expected;
        if (try_word("true"))
            expected = true;
        else if (try_word("false"))
            expected = false;
        else
            throw err("'true' or 'false'");
        return FlagExpr::leaf(std::move(name), expected);
    }

    bool accept_op(bool want_and) {
        std::size_t save = pos_;
        skip_ws();
        bool ok = false;
        if (spelling_ == ExprSpelling::Dsl) {
            ok = try_word(want_and ? "and" : "or");
        } else {
            const char* sym = want_and ? "&&" : "||";
            if (peek() == sym[0] && peek(1) == sym[1]) {
                pos_ += 2;
                ok = true;
            }
        }
        if (!ok) pos_ = save;
        return ok;
    }

    std::string read_flag_name() {
        skip_ws();
        std::size_t start = pos_;
        while (!at_end()) {
            char c = text_[pos_];
            if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) throw err("flag name");
        std::string name = text_.substr(start, pos_ - start);
        if (!is_valid_flag_name(name)) throw err("flag name ending in _FLG");
        return name;
    }

    bool try_word(const char* word) {
        std::size_t len = std::char_traits<char>::length(word);
        if (text_.compare(pos_, len, word) != 0) return false;
        // keyword must not run into an identifier character
        char next = pos_ + len < text_.size() ? text_[pos_ + len] : ' ';
        if (std::isalnum(static_cast<unsigned char>(next)) || next == '_') return false;
        pos_ += len;
        return true;
    }

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }
    bool at_end() const { return pos_ >= text_.size(); }
    void skip_ws() {
        while (!at_end() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    SyntaxError err(const std::string& expected) const {
        return SyntaxError(line_, column_base_ + static_cast<int>(pos_), expected);
    }

    const std::string& text_;
    ExprSpelling spelling_;
    int line_;
    int column_base_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline FlagExpr parse_expr(const std::string& text, ExprSpelling spelling,
                           int line = 1, int column_base = 1) {
    return detail::ExprParser(text, spelling, line, column_base).parse();
}

}  // namespace sitebt
