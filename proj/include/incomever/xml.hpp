#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core.hpp"
#include "text.hpp"

namespace incv::xml {

struct ParseError : InputError {
    using InputError::InputError;
};

/// Element node of a parsed document. Text children are folded into `text`
/// (concatenated in document order); mixed content order is not kept.
struct Node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<std::unique_ptr<Node>> children;
    std::string text;

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key) return &v;
        return nullptr;
    }

    /// Own text plus all descendant text, whitespace collapsed.
    std::string text_content() const {
        std::string out = text;
        for (const auto& c : children) out += " " + c->text_content();
        return text::collapse_ws(out);
    }
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : s_(src) {}

    std::unique_ptr<Node> document() {
        skip_misc();
        if (at_end()) throw ParseError("xml: empty document");
        auto root = element();
        skip_misc();
        if (!at_end()) throw ParseError("xml: trailing content after root element");
        return root;
    }

private:
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }
    bool starts(std::string_view p) const { return s_.substr(pos_).starts_with(p); }

    void skip_ws() {
        while (!at_end() && text::is_space(s_[pos_])) ++pos_;
    }

    void skip_past(std::string_view terminator) {
        auto e = s_.find(terminator, pos_);
        if (e == std::string_view::npos) throw ParseError("xml: unterminated construct");
        pos_ = e + terminator.size();
    }

    // Prolog, comments, processing instructions, doctype.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts("<?"))
                skip_past("?>");
            else if (starts("<!--"))
                skip_past("-->");
            else if (starts("<!DOCTYPE") || starts("<!doctype"))
                skip_past(">");
            else
                return;
        }
    }

    static bool name_char(char c) {
        return text::is_alnum(c) || c == '_' || c == '-' || c == '.' || c == ':';
    }

    std::string name() {
        const auto b = pos_;
        while (!at_end() && name_char(s_[pos_])) ++pos_;
        if (b == pos_) throw ParseError("xml: expected a name at offset " + std::to_string(b));
        return std::string(s_.substr(b, pos_ - b));
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    static std::string decode(std::string_view raw) {
        std::string out;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out += raw[i];
                continue;
            }
            const auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) throw ParseError("xml: unterminated entity");
            const auto ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out += '&';
            else if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else if (ent.starts_with("#x") || ent.starts_with("#X"))
                append_utf8(out, static_cast<std::uint32_t>(std::stoul(std::string(ent.substr(2)), nullptr, 16)));
            else if (ent.starts_with("#"))
                append_utf8(out, static_cast<std::uint32_t>(std::stoul(std::string(ent.substr(1)))));
            else
                throw ParseError("xml: unknown entity &" + std::string(ent) + ";");
            i = semi;
        }
        return out;
    }

    std::unique_ptr<Node> element() {
        if (peek() != '<') throw ParseError("xml: expected '<' at offset " + std::to_string(pos_));
        ++pos_;
        auto node = std::make_unique<Node>();
        node->name = name();
        for (;;) {
            skip_ws();
            if (starts("/>")) {
                pos_ += 2;
                return node;
            }
            if (peek() == '>') {
                ++pos_;
                break;
            }
            auto key = name();
            skip_ws();
            if (peek() != '=') throw ParseError("xml: expected '=' after attribute " + key);
            ++pos_;
            skip_ws();
            const char q = peek();
            if (q != '"' && q != '\'') throw ParseError("xml: attribute value must be quoted");
            const auto end = s_.find(q, pos_ + 1);
            if (end == std::string_view::npos) throw ParseError("xml: unterminated attribute value");
            node->attributes.emplace_back(std::move(key), decode(s_.substr(pos_ + 1, end - pos_ - 1)));
            pos_ = end + 1;
        }
        // Content.
        for (;;) {
            if (at_end()) throw ParseError("xml: unclosed element <" + node->name + ">");
            if (starts("</")) {
                pos_ += 2;
                auto closing = name();
                if (closing != node->name)
                    throw ParseError("xml: mismatched </" + closing + "> for <" + node->name + ">");
                skip_ws();
                if (peek() != '>') throw ParseError("xml: malformed closing tag");
                ++pos_;
                return node;
            }
            if (starts("<!--")) {
                skip_past("-->");
            } else if (starts("<![CDATA[")) {
                const auto b = pos_ + 9;
                skip_past("]]>");
                node->text += s_.substr(b, pos_ - 3 - b);
            } else if (starts("<?")) {
                skip_past("?>");
            } else if (peek() == '<') {
                node->children.push_back(element());
            } else {
                const auto b = pos_;
                while (!at_end() && s_[pos_] != '<') ++pos_;
                node->text += decode(s_.substr(b, pos_ - b));
            }
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::unique_ptr<Node> parse(std::string_view src) { return detail::Parser(src).document(); }

/// Escapes text for use in element content or a quoted attribute.
inline std::string escape(std::string_view raw) {
    std::string out;
    for (char c : raw) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Path expressions
//
// A small XPath subset, enough for per-site wrappers:
//   /a/b/c            child steps from the root element
//   //c               descendant-or-self step
//   *                 any element name
//   [n]               1-based position among the step's matches under one parent
//   [@k='v']          attribute equality
//   .../@attr         terminal attribute value
//   .../text()        terminal text (same as selecting the element)

struct PathError : ConfigError {
    using ConfigError::ConfigError;
};

namespace detail {

struct Step {
    bool descendant = false;
    std::string name;  // "*" = any
    std::vector<std::pair<std::string, std::string>> attr_eq;
    std::optional<std::size_t> position;
};

struct Path {
    std::vector<Step> steps;
    std::optional<std::string> attribute;  // terminal @attr
};

inline Path compile(std::string_view expr) {
    Path p;
    std::size_t i = 0;
    if (expr.empty() || expr[0] != '/') throw PathError("path '" + std::string(expr) + "' must start with '/'");
    while (i < expr.size()) {
        if (expr[i] != '/') throw PathError("path '" + std::string(expr) + "': expected '/'");
        Step st;
        ++i;
        if (i < expr.size() && expr[i] == '/') {
            st.descendant = true;
            ++i;
        }
        if (i < expr.size() && expr[i] == '@') {
            ++i;
            auto b = i;
            while (i < expr.size() && expr[i] != '/') ++i;
            if (i != expr.size()) throw PathError("path '" + std::string(expr) + "': @attr must be terminal");
            p.attribute = std::string(expr.substr(b, i - b));
            break;
        }
        auto b = i;
        while (i < expr.size() && expr[i] != '/' && expr[i] != '[') ++i;
        st.name = std::string(expr.substr(b, i - b));
        if (st.name == "text()") {
            if (i != expr.size()) throw PathError("path '" + std::string(expr) + "': text() must be terminal");
            break;
        }
        if (st.name.empty()) throw PathError("path '" + std::string(expr) + "': empty step");
        while (i < expr.size() && expr[i] == '[') {
            const auto close = expr.find(']', i);
            if (close == std::string_view::npos) throw PathError("path '" + std::string(expr) + "': unclosed '['");
            auto pred = expr.substr(i + 1, close - i - 1);
            if (!pred.empty() && pred[0] == '@') {
                const auto eq = pred.find('=');
                if (eq == std::string_view::npos || pred.size() < eq + 3)
                    throw PathError("path '" + std::string(expr) + "': bad attribute predicate");
                auto val = pred.substr(eq + 1);
                if ((val.front() != '\'' && val.front() != '"') || val.back() != val.front())
                    throw PathError("path '" + std::string(expr) + "': predicate value must be quoted");
                st.attr_eq.emplace_back(std::string(pred.substr(1, eq - 1)),
                                        std::string(val.substr(1, val.size() - 2)));
            } else {
                std::size_t n = 0;
                for (char c : pred) {
                    if (c < '0' || c > '9') throw PathError("path '" + std::string(expr) + "': bad predicate");
                    n = n * 10 + static_cast<std::size_t>(c - '0');
                }
                if (n == 0) throw PathError("path '" + std::string(expr) + "': positions are 1-based");
                st.position = n;
            }
            i = close + 1;
        }
        p.steps.push_back(std::move(st));
    }
    if (p.steps.empty()) throw PathError("path '" + std::string(expr) + "' selects nothing");
    return p;
}

inline bool step_matches(const Step& st, const Node& n) {
    if (st.name != "*" && st.name != n.name) return false;
    for (const auto& [k, v] : st.attr_eq) {
        const auto* a = n.attribute(k);
        if (!a || *a != v) return false;
    }
    return true;
}

inline void collect_descendants(const Node& n, const Step& st, std::vector<const Node*>& out) {
    if (step_matches(st, n)) out.push_back(&n);
    for (const auto& c : n.children) collect_descendants(*c, st, out);
}

}  // namespace detail

/// All nodes selected by `expr`, in document order.
inline std::vector<const Node*> select(const Node& root, std::string_view expr) {
    const auto path = detail::compile(expr);
    // The root element is the single child of a virtual document node.
    std::vector<const Node*> current;
    {
        const auto& first = path.steps.front();
        std::vector<const Node*> matched;
        if (first.descendant)
            detail::collect_descendants(root, first, matched);
        else if (detail::step_matches(first, root))
            matched.push_back(&root);
        if (first.position) {
            if (*first.position <= matched.size()) current.push_back(matched[*first.position - 1]);
        } else {
            current = std::move(matched);
        }
    }
    for (std::size_t s = 1; s < path.steps.size(); ++s) {
        const auto& st = path.steps[s];
        std::vector<const Node*> next;
        for (const Node* parent : current) {
            std::vector<const Node*> matched;
            if (st.descendant) {
                for (const auto& c : parent->children) detail::collect_descendants(*c, st, matched);
            } else {
                for (const auto& c : parent->children)
                    if (detail::step_matches(st, *c)) matched.push_back(c.get());
            }
            if (st.position) {
                if (*st.position <= matched.size()) next.push_back(matched[*st.position - 1]);
            } else {
                next.insert(next.end(), matched.begin(), matched.end());
            }
        }
        current = std::move(next);
    }
    if (path.attribute) {
        std::vector<const Node*> with_attr;
        for (const Node* n : current)
            if (n->attribute(*path.attribute)) with_attr.push_back(n);
        return with_attr;
    }
    return current;
}

/// String value of the single node `expr` selects; nullopt when nothing matches.
/// Throws PathError when more than one node matches.
inline std::optional<std::string> value(const Node& root, std::string_view expr) {
    const auto nodes = select(root, expr);
    if (nodes.empty()) return std::nullopt;
    if (nodes.size() > 1)
        throw PathError("path '" + std::string(expr) + "' matched " + std::to_string(nodes.size()) + " nodes");
    const auto path = detail::compile(expr);
    if (path.attribute) return *nodes.front()->attribute(*path.attribute);
    return nodes.front()->text_content();
}

}  // namespace incv::xml
