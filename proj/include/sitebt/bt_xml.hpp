#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "sitebt/btree.hpp"
#include "sitebt/compile.hpp"
#include "sitebt/errors.hpp"

namespace sitebt {

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string joints_attr(const std::vector<double>& joints) {
    std::string out;
    for (std::size_t i = 0; i < joints.size(); ++i) {
        if (i) out += ";";
        out += format_double(joints[i]);
    }
    return out;
}

inline std::vector<double> parse_joints_attr(const std::string& text) {
    std::vector<double> out;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        std::size_t used = 0;
        double value;
        try {
            value = std::stod(current, &used);
        } catch (const std::exception&) {
            throw BadAttributeError("SetJointTargets", "joints value is not a number: " + current);
        }
        if (used != current.size())
            throw BadAttributeError("SetJointTargets", "joints value is not a number: " + current);
        out.push_back(value);
        current.clear();
    };
    for (char c : text) {
        if (c == ';')
            flush();
        else
            current.push_back(c);
    }
    flush();
    return out;
}

using AttrList = std::vector<std::pair<std::string, std::string>>;

inline AttrList node_attributes(const BTNode& node) {
    AttrList attrs;
    auto add = [&attrs](const std::string& k, const std::string& v) {
        attrs.emplace_back(k, v);
    };
    switch (node.kind) {
        case BTNode::Kind::Sequence:
        case BTNode::Kind::ReactiveSequence:
        case BTNode::Kind::Fallback:
            break;
        case BTNode::Kind::RetryUntilSuccessful:
            add("num_attempts", std::to_string(node.max_attempts));
            break;
        case BTNode::Kind::DBReader:
            add("flag", node.flag);
            add("output_key", node.output_key);
            break;
        case BTNode::Kind::ConditionalExpression:
            add("expr", expr_to_string(node.expr, ExprSpelling::Xml));
            break;
        case BTNode::Kind::SetFlag:
            add("flag", node.flag);
            add("value", node.value ? "true" : "false");
            break;
        case BTNode::Kind::ActionLeaf: {
            const PrimitiveAction& a = node.action;
            switch (a.verb) {
                case PrimitiveAction::Verb::MoveAlongPath:
                    add("path", a.path_id);
                    add("from", a.from);
                    add("to", a.to);
                    break;
                case PrimitiveAction::Verb::SetJointTargets:
                    add("pose", a.pose);
                    add("joints", joints_attr(a.joints));
                    if (!a.target.empty()) add("target", a.target);
                    break;
                case PrimitiveAction::Verb::DumpBed:
                case PrimitiveAction::Verb::Wait:
                    break;
            }
            add("duration", std::to_string(a.duration_ticks));
            break;
        }
    }
    if (node.stmt_index > 0) add("stmt", std::to_string(node.stmt_index));
    if (!node.skill.empty()) add("skill", node.skill);
    return attrs;
}

inline std::string node_tag(const BTNode& node) {
    switch (node.kind) {
        case BTNode::Kind::Sequence: return "Sequence";
        case BTNode::Kind::ReactiveSequence: return "ReactiveSequence";
        case BTNode::Kind::Fallback: return "Fallback";
        case BTNode::Kind::RetryUntilSuccessful: return "RetryUntilSuccessful";
        case BTNode::Kind::DBReader: return "DBReader";
        case BTNode::Kind::ConditionalExpression: return "ConditionalExpression";
        case BTNode::Kind::SetFlag: return "SetFlag";
        case BTNode::Kind::ActionLeaf: return to_string(node.action.verb);
    }
    return "Unknown";
}

inline void emit_node(const BTNode& node, int depth, std::string& out) {
    std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    out += indent + "<" + node_tag(node);
    for (const auto& [k, v] : node_attributes(node)) out += " " + k + "=\"" + xml_escape(v) + "\"";
    if (node.children.empty()) {
        out += "/>\n";
        return;
    }
    out += ">\n";
    for (const auto& c : node.children) emit_node(c, depth + 1, out);
    out += indent + "</" + node_tag(node) + ">\n";
}

}  // namespace detail

/// One XML document for one machine's tree. Emission is byte-deterministic:
/// fixed attribute order, two-space indentation, LF line endings.
inline std::string emit_tree_xml(const BTNode& root) {
    std::string out;
    out += "<root BTCPP_format=\"4\" main_tree_to_execute=\"MainTree\">\n";
    out += "  <BehaviorTree ID=\"MainTree\">\n";
    detail::emit_node(root, 2, out);
    out += "  </BehaviorTree>\n";
    out += "</root>\n";
    return out;
}

inline std::map<std::string, std::string> emit_xml(const CompiledPlan& plan) {
    std::map<std::string, std::string> out;
    for (const auto& [machine, root] : plan.trees) out[machine] = emit_tree_xml(root);
    return out;
}

namespace detail {

struct XmlElement {
    std::string tag;
    AttrList attrs;
    std::vector<XmlElement> children;

    const std::string* attr(const std::string& key) const {
        for (const auto& [k, v] : attrs)
            if (k == key) return &v;
        return nullptr;
    }
};

// Minimal strict reader for the dialect: elements and attributes only, no
// text content, comments and an optional XML prolog are skipped.
class XmlReader {
public:
    explicit XmlReader(const std::string& text) : text_(text) {}

    XmlElement parse_document() {
        skip_misc();
        XmlElement root = parse_element();
        skip_misc();
        if (pos_ != text_.size()) throw XmlSyntaxError("trailing content after root element");
        return root;
    }

private:
    XmlElement parse_element() {
        if (peek() != '<') throw XmlSyntaxError("expected '<' at offset " + std::to_string(pos_));
        ++pos_;
        XmlElement el;
        el.tag = read_name();
        while (true) {
            skip_ws();
            if (peek() == '/') {
                ++pos_;
                expect('>');
                return el;
            }
            if (peek() == '>') {
                ++pos_;
                break;
            }
            std::string key = read_name();
            skip_ws();
            expect('=');
            skip_ws();
            expect('"');
            std::string value;
            while (peek() != '"') {
                if (at_end()) throw XmlSyntaxError("unterminated attribute value");
                value.push_back(text_[pos_++]);
            }
            ++pos_;
            el.attrs.emplace_back(key, unescape(value));
        }
        while (true) {
            skip_misc();
            if (at_end()) throw XmlSyntaxError("unexpected end inside <" + el.tag + ">");
            if (peek() == '<' && peek(1) == '/') {
                pos_ += 2;
                std::string closing = read_name();
                if (closing != el.tag)
                    throw XmlSyntaxError("mismatched closing tag </" + closing + "> for <" +
                                         el.tag + ">");
                skip_ws();
                expect('>');
                return el;
            }
            el.children.push_back(parse_element());
        }
    }

    std::string read_name() {
        std::size_t start = pos_;
        while (!at_end()) {
            char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) throw XmlSyntaxError("expected name at offset " + std::to_string(pos_));
        return text_.substr(start, pos_ - start);
    }

    static std::string unescape(const std::string& s) {
        std::string out;
        for (std::size_t i = 0; i < s.size();) {
            if (s[i] != '&') {
                out.push_back(s[i++]);
                continue;
            }
            auto matches = [&](const char* ent) {
                std::size_t len = std::char_traits<char>::length(ent);
                return s.compare(i, len, ent) == 0;
            };
            if (matches("&amp;")) {
                out.push_back('&');
                i += 5;
            } else if (matches("&lt;")) {
                out.push_back('<');
                i += 4;
            } else if (matches("&gt;")) {
                out.push_back('>');
                i += 4;
            } else if (matches("&quot;")) {
                out.push_back('"');
                i += 6;
            } else {
                throw XmlSyntaxError("unknown entity in attribute value");
            }
        }
        return out;
    }

    void skip_misc() {
        while (true) {
            skip_all_ws();
            if (peek() == '<' && peek(1) == '?') {
                std::size_t end = text_.find("?>", pos_);
                if (end == std::string::npos) throw XmlSyntaxError("unterminated prolog");
                pos_ = end + 2;
                continue;
            }
            if (peek() == '<' && peek(1) == '!') {
                std::size_t end = text_.find("-->", pos_);
                if (end == std::string::npos) throw XmlSyntaxError("unterminated comment");
                pos_ = end + 3;
                continue;
            }
            return;
        }
    }

    void skip_ws() {
        while (!at_end() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    void skip_all_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    void expect(char c) {
        if (peek() != c)
            throw XmlSyntaxError(std::string("expected '") + c + "' at offset " +
                                 std::to_string(pos_));
        ++pos_;
    }
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }
    bool at_end() const { return pos_ >= text_.size(); }

    const std::string& text_;
    std::size_t pos_ = 0;
};

inline int require_int_attr(const XmlElement& el, const std::string& key) {
    const std::string* v = el.attr(key);
    if (!v) throw BadAttributeError(el.tag, "missing " + key);
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(*v, &used);
    } catch (const std::exception&) {
        throw BadAttributeError(el.tag, key + " is not an integer: " + *v);
    }
    if (used != v->size()) throw BadAttributeError(el.tag, key + " is not an integer: " + *v);
    return value;
}

inline std::string require_attr(const XmlElement& el, const std::string& key) {
    const std::string* v = el.attr(key);
    if (!v) throw BadAttributeError(el.tag, "missing " + key);
    return *v;
}

inline void check_attrs(const XmlElement& el, std::vector<std::string> allowed) {
    allowed.push_back("stmt");
    allowed.push_back("skill");
    for (const auto& [k, v] : el.attrs) {
        bool ok = false;
        for (const auto& a : allowed)
            if (k == a) ok = true;
        if (!ok) throw BadAttributeError(el.tag, "unexpected attribute " + k);
    }
}

inline BTNode element_to_node(const XmlElement& el) {
    BTNode node;
    auto composite = [&el](BTNode::Kind kind) {
        BTNode n;
        n.kind = kind;
        if (el.children.empty())
            throw XmlSyntaxError("<" + el.tag + "> needs at least one child");
        for (const auto& c : el.children) n.children.push_back(element_to_node(c));
        return n;
    };

    if (el.tag == "Sequence") {
        check_attrs(el, {});
        node = composite(BTNode::Kind::Sequence);
    } else if (el.tag == "ReactiveSequence") {
        check_attrs(el, {});
        node = composite(BTNode::Kind::ReactiveSequence);
    } else if (el.tag == "Fallback") {
        check_attrs(el, {});
        node = composite(BTNode::Kind::Fallback);
    } else if (el.tag == "RetryUntilSuccessful") {
        check_attrs(el, {"num_attempts"});
        node = composite(BTNode::Kind::RetryUntilSuccessful);
        node.max_attempts = require_int_attr(el, "num_attempts");
        if (node.children.size() != 1)
            throw XmlSyntaxError("RetryUntilSuccessful needs exactly one child");
    } else if (el.tag == "DBReader") {
        check_attrs(el, {"flag", "output_key"});
        node.kind = BTNode::Kind::DBReader;
        node.flag = require_attr(el, "flag");
        node.output_key = require_attr(el, "output_key");
    } else if (el.tag == "ConditionalExpression") {
        check_attrs(el, {"expr"});
        node.kind = BTNode::Kind::ConditionalExpression;
        node.expr = parse_expr(require_attr(el, "expr"), ExprSpelling::Xml);
    } else if (el.tag == "SetFlag") {
        check_attrs(el, {"flag", "value"});
        node.kind = BTNode::Kind::SetFlag;
        node.flag = require_attr(el, "flag");
        std::string v = require_attr(el, "value");
        if (v != "true" && v != "false") throw BadAttributeError(el.tag, "value must be a boolean");
        node.value = v == "true";
    } else if (el.tag == "MoveAlongPath") {
        check_attrs(el, {"path", "from", "to", "duration"});
        node.kind = BTNode::Kind::ActionLeaf;
        node.action.verb = PrimitiveAction::Verb::MoveAlongPath;
        node.action.path_id = require_attr(el, "path");
        node.action.from = require_attr(el, "from");
        node.action.to = require_attr(el, "to");
        node.action.duration_ticks = require_int_attr(el, "duration");
    } else if (el.tag == "SetJointTargets") {
        check_attrs(el, {"pose", "joints", "target", "duration"});
        node.kind = BTNode::Kind::ActionLeaf;
        node.action.verb = PrimitiveAction::Verb::SetJointTargets;
        node.action.pose = require_attr(el, "pose");
        node.action.joints = parse_joints_attr(require_attr(el, "joints"));
        if (const std::string* t = el.attr("target")) node.action.target = *t;
        node.action.duration_ticks = require_int_attr(el, "duration");
    } else if (el.tag == "DumpBed") {
        check_attrs(el, {"duration"});
        node.kind = BTNode::Kind::ActionLeaf;
        node.action.verb = PrimitiveAction::Verb::DumpBed;
        node.action.duration_ticks = require_int_attr(el, "duration");
    } else if (el.tag == "Wait") {
        check_attrs(el, {"duration"});
        node.kind = BTNode::Kind::ActionLeaf;
        node.action.verb = PrimitiveAction::Verb::Wait;
        node.action.duration_ticks = require_int_attr(el, "duration");
    } else {
        throw UnknownTagError(el.tag);
    }

    if (node.kind == BTNode::Kind::ActionLeaf && node.action.duration_ticks < 1)
        throw BadAttributeError(el.tag, "duration must be >= 1");
    if (el.attr("stmt")) node.stmt_index = require_int_attr(el, "stmt");
    if (const std::string* s = el.attr("skill")) node.skill = *s;
    return node;
}

}  // namespace detail

/// Parses one machine document emitted by emit_tree_xml (or authored in the
/// same dialect). Unknown tags and attributes are rejected.
inline BTNode parse_tree_xml(const std::string& document) {
    detail::XmlReader reader(document);
    detail::XmlElement root = reader.parse_document();
    if (root.tag != "root") throw XmlSyntaxError("document root must be <root>");
    if (root.children.size() != 1 || root.children.front().tag != "BehaviorTree")
        throw XmlSyntaxError("<root> must contain exactly one <BehaviorTree>");
    const detail::XmlElement& bt = root.children.front();
    if (bt.children.size() != 1)
        throw XmlSyntaxError("<BehaviorTree> must contain exactly one tree root");
    return detail::element_to_node(bt.children.front());
}

}  // namespace sitebt
