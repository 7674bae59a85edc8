#pragma once

#include <string>
#include <vector>

#include "sitebt/errors.hpp"
#include "sitebt/flag_expr.hpp"
#include "sitebt/skills.hpp"

namespace sitebt {

/// One line of the plan: a skill call on a machine, an optional flag
/// precondition, and an optional reasoning comment.
struct ActionStatement {
    int index = 0;                     // 1-based, contiguous
    std::string skill;
    std::string machine;               // first argument of the call
    std::vector<std::string> params;   // remaining arguments
    FlagExpr precondition = FlagExpr::always_true();
    std::string reasoning;
};

inline bool operator==(const ActionStatement& a, const ActionStatement& b) {
    return a.index == b.index && a.skill == b.skill && a.machine == b.machine &&
           a.params == b.params && a.precondition == b.precondition &&
           a.reasoning == b.reasoning;
}

struct GeneratedFlag {
    FlagName name;
    std::string description;
};

inline bool operator==(const GeneratedFlag& a, const GeneratedFlag& b) {
    return a.name == b.name && a.description == b.description;
}

/// The parsed plan: ordered statements plus declarations of the synchronization
/// flags the plan introduces beyond the sensing defaults.
struct ActionSequence {
    std::vector<ActionStatement> statements;
    std::vector<GeneratedFlag> generated_flags;

    bool declares_flag(const FlagName& name) const {
        for (const auto& g : generated_flags)
            if (g.name == name) return true;
        return false;
    }
};

inline bool operator==(const ActionSequence& a, const ActionSequence& b) {
    return a.statements == b.statements && a.generated_flags == b.generated_flags;
}

namespace detail {

struct Line {
    int number;
    std::string text;
};

inline std::vector<Line> split_lines(const std::string& source) {
    std::vector<Line> lines;
    std::string current;
    int number = 1;
    for (char c : source) {
        if (c == '\n') {
            lines.push_back({number++, current});
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    if (!current.empty()) lines.push_back({number, current});
    return lines;
}

inline bool is_blank(const std::string& s) {
    for (char c : s)
        if (c != ' ' && c != '\t') return false;
    return true;
}

class StatementParser {
public:
    StatementParser(const Line& line, const SkillRegistry& skills)
        : line_(line), skills_(skills) {}

    ActionStatement parse() {
        ActionStatement stmt;
        stmt.index = parse_index();
        expect('.', "'.' after statement index");
        skip_ws();
        std::string skill_name = parse_identifier("skill name");
        auto sig_it = skills_.find(skill_name);
        if (sig_it == skills_.end()) throw UnknownSkillError(skill_name, line_.number);
        stmt.skill = skill_name;
        skip_ws();
        expect('(', "'('");
        std::vector<std::string> args;
        skip_ws();
        if (peek() != ')') {
            args.push_back(parse_identifier("argument"));
            skip_ws();
            while (peek() == ',') {
                ++pos_;
                skip_ws();
                args.push_back(parse_identifier("argument"));
                skip_ws();
            }
        }
        expect(')', "')' or ','");
        if (static_cast<int>(args.size()) != sig_it->second.arity())
            throw BadArityError(skill_name, static_cast<int>(args.size()),
                                sig_it->second.arity());
        stmt.machine = args.front();
        stmt.params.assign(args.begin() + 1, args.end());

        skip_ws();
        if (try_word("depends_on")) {
            skip_ws();
            std::size_t expr_start = pos_;
            std::size_t expr_end = line_.text.find('#', pos_);
            std::string expr_text =
                line_.text.substr(expr_start, expr_end == std::string::npos
                                                  ? std::string::npos
                                                  : expr_end - expr_start);
            // trim trailing whitespace off the expression slice
            while (!expr_text.empty() && (expr_text.back() == ' ' || expr_text.back() == '\t'))
                expr_text.pop_back();
            stmt.precondition = parse_expr(expr_text, ExprSpelling::Dsl, line_.number,
                                           static_cast<int>(expr_start) + 1);
            pos_ = expr_end == std::string::npos ? line_.text.size() : expr_end;
        }
        skip_ws();
        if (peek() == '#') {
            ++pos_;
            if (peek() == ' ') ++pos_;
            stmt.reasoning = line_.text.substr(pos_);
            pos_ = line_.text.size();
        }
        skip_ws();
        if (pos_ != line_.text.size()) throw err("end of line");
        return stmt;
    }

private:
    int parse_index() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < line_.text.size() && std::isdigit(static_cast<unsigned char>(line_.text[pos_])))
            ++pos_;
        if (pos_ == start) throw err("statement index");
        return std::stoi(line_.text.substr(start, pos_ - start));
    }

    std::string parse_identifier(const std::string& what) {
        std::size_t start = pos_;
        while (pos_ < line_.text.size()) {
            char c = line_.text[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) throw err(what);
        return line_.text.substr(start, pos_ - start);
    }

    bool try_word(const char* word) {
        std::size_t len = std::char_traits<char>::length(word);
        if (line_.text.compare(pos_, len, word) != 0) return false;
        char next = pos_ + len < line_.text.size() ? line_.text[pos_ + len] : ' ';
        if (std::isalnum(static_cast<unsigned char>(next)) || next == '_') return false;
        pos_ += len;
        return true;
    }

    void expect(char c, const std::string& what) {
        if (peek() != c) throw err(what);
        ++pos_;
    }

    char peek() const { return pos_ < line_.text.size() ? line_.text[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < line_.text.size() && (line_.text[pos_] == ' ' || line_.text[pos_] == '\t'))
            ++pos_;
    }
    SyntaxError err(const std::string& expected) const {
        return SyntaxError(line_.number, static_cast<int>(pos_) + 1, expected);
    }

    const Line& line_;
    const SkillRegistry& skills_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the plan DSL. Statement lines look like
///   2. move(dump_truck, loading_site) depends_on EXCAVATOR_INITIAL_POSE_FLG==true # why
/// and generated-flag declarations follow the statements:
///   EXCAVATOR_INITIAL_POSE_FLG: True when the excavator is in its initial pose.
inline ActionSequence parse(const std::string& source,
                            const SkillRegistry& skills = default_skills()) {
    ActionSequence seq;
    bool in_declarations = false;
    int expected_index = 1;
    for (const auto& line : detail::split_lines(source)) {
        if (detail::is_blank(line.text)) continue;

        std::size_t first = line.text.find_first_not_of(" \t");
        char c = line.text[first];
        if (!in_declarations && std::isdigit(static_cast<unsigned char>(c))) {
            ActionStatement stmt = detail::StatementParser(line, skills).parse();
            if (stmt.index != expected_index)
                throw SyntaxError(line.number, static_cast<int>(first) + 1,
                                  "statement index " + std::to_string(expected_index));
            ++expected_index;
            seq.statements.push_back(std::move(stmt));
            continue;
        }

        // flag declaration: NAME_FLG: description
        std::size_t colon = line.text.find(':', first);
        if (colon == std::string::npos)
            throw SyntaxError(line.number, static_cast<int>(line.text.size()) + 1,
                              "':' after flag name");
        std::string name = line.text.substr(first, colon - first);
        if (!is_valid_flag_name(name))
            throw SyntaxError(line.number, static_cast<int>(first) + 1,
                              "flag name ending in _FLG");
        std::size_t desc_start = line.text.find_first_not_of(" \t", colon + 1);
        std::string description =
            desc_start == std::string::npos ? "" : line.text.substr(desc_start);
        seq.generated_flags.push_back({std::move(name), std::move(description)});
        in_declarations = true;
    }
    return seq;
}

/// Canonical DSL text; parse(serialize(seq)) is structurally equal to seq.
inline std::string serialize(const ActionSequence& seq) {
    std::string out;
    for (const auto& stmt : seq.statements) {
        out += std::to_string(stmt.index) + ". " + stmt.skill + "(" + stmt.machine;
        for (const auto& p : stmt.params) out += ", " + p;
        out += ")";
        if (!stmt.precondition.is_always_true())
            out += " depends_on " + expr_to_string(stmt.precondition, ExprSpelling::Dsl);
        if (!stmt.reasoning.empty()) out += " # " + stmt.reasoning;
        out += "\n";
    }
    if (!seq.generated_flags.empty()) {
        if (!seq.statements.empty()) out += "\n";
        for (const auto& g : seq.generated_flags) out += g.name + ": " + g.description + "\n";
    }
    return out;
}

}  // namespace sitebt
