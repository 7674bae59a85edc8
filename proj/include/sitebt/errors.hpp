#pragma once

#include <stdexcept>
#include <string>

namespace sitebt {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- flag store ----

class DuplicateFlagError : public Error {
public:
    explicit DuplicateFlagError(const std::string& name)
        : Error("duplicate flag: " + name), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UnknownFlagError : public Error {
public:
    explicit UnknownFlagError(const std::string& name)
        : Error("unknown flag: " + name), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class MissingFlagError : public Error {
public:
    explicit MissingFlagError(const std::string& name)
        : Error("flag missing from snapshot: " + name), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class BadFlagNameError : public Error {
public:
    explicit BadFlagNameError(const std::string& name)
        : Error("bad flag name: " + name) {}
};

// ---- action sequence parsing ----

class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, const std::string& expected)
        : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) +
                ", expected " + expected),
          line_(line), column_(column), expected_(expected) {}
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& expected() const { return expected_; }

private:
    int line_;
    int column_;
    std::string expected_;
};

class UnknownSkillError : public Error {
public:
    UnknownSkillError(const std::string& skill, int line)
        : Error("unknown skill '" + skill + "' at line " + std::to_string(line)),
          skill_(skill), line_(line) {}
    const std::string& skill() const { return skill_; }
    int line() const { return line_; }

private:
    std::string skill_;
    int line_;
};

class BadArityError : public Error {
public:
    BadArityError(const std::string& skill, int got, int want)
        : Error("skill '" + skill + "' takes " + std::to_string(want) +
                " argument(s), got " + std::to_string(got)),
          skill_(skill), got_(got), want_(want) {}
    const std::string& skill() const { return skill_; }
    int got() const { return got_; }
    int want() const { return want_; }

private:
    std::string skill_;
    int got_;
    int want_;
};

class UnvalidatedError : public Error {
public:
    explicit UnvalidatedError(const std::string& what) : Error("sequence not valid: " + what) {}
};

// ---- compiler ----

class MissingParamError : public Error {
public:
    MissingParamError(const std::string& kind, const std::string& key)
        : Error("missing task parameter [" + kind + "] " + key), kind_(kind), key_(key) {}
    const std::string& kind() const { return kind_; }
    const std::string& key() const { return key_; }

private:
    std::string kind_;
    std::string key_;
};

class UnboundFlagError : public Error {
public:
    explicit UnboundFlagError(const std::string& flag)
        : Error("generated flag '" + flag + "' does not bind to any statement"), flag_(flag) {}
    const std::string& flag() const { return flag_; }

private:
    std::string flag_;
};

class AmbiguousFlagBindingError : public Error {
public:
    AmbiguousFlagBindingError(const std::string& flag, const std::string& detail)
        : Error("generated flag '" + flag + "' binds ambiguously: " + detail), flag_(flag) {}
    const std::string& flag() const { return flag_; }

private:
    std::string flag_;
};

// ---- behavior tree XML ----

class XmlSyntaxError : public Error {
public:
    explicit XmlSyntaxError(const std::string& what) : Error("xml: " + what) {}
};

class UnknownTagError : public Error {
public:
    explicit UnknownTagError(const std::string& tag)
        : Error("unknown tree node tag <" + tag + ">"), tag_(tag) {}
    const std::string& tag() const { return tag_; }

private:
    std::string tag_;
};

class BadAttributeError : public Error {
public:
    BadAttributeError(const std::string& tag, const std::string& detail)
        : Error("bad attribute on <" + tag + ">: " + detail) {}
};

// ---- behavior tree engine ----

class MalformedTreeError : public Error {
public:
    explicit MalformedTreeError(const std::string& what) : Error("malformed tree: " + what) {}
};

class UnknownNodeError : public Error {
public:
    explicit UnknownNodeError(int id)
        : Error("no node with id " + std::to_string(id)), id_(id) {}
    int id() const { return id_; }

private:
    int id_;
};

// ---- planner ----

class MissingContextError : public Error {
public:
    explicit MissingContextError(const std::string& item)
        : Error("prompt context missing: " + item), item_(item) {}
    const std::string& item() const { return item_; }

private:
    std::string item_;
};

class HttpError : public Error {
public:
    explicit HttpError(int status)
        : Error("http error " + std::to_string(status)), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class TimeoutError : public Error {
public:
    TimeoutError() : Error("request timed out") {}
};

class AuthMissingError : public Error {
public:
    explicit AuthMissingError(const std::string& env_var)
        : Error("auth token environment variable not set: " + env_var) {}
};

class BudgetExhaustedError : public Error {
public:
    BudgetExhaustedError() : Error("refinement budget exhausted (one refinement per stage)") {}
};

class UnsupportedScenarioError : public Error {
public:
    explicit UnsupportedScenarioError(const std::string& what)
        : Error("unsupported scenario: " + what) {}
};

// ---- io ----

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace sitebt
