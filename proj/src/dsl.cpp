#include "btweave/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

#include "btweave/errors.hpp"

namespace btweave {

// ---------------------------------------------------------------------------
// Lexer: eager tokenization with 1-based positions. Any character that fits
// no token is rejected here, so a corrupted token is always reported at its
// own position regardless of grammar context.
// ---------------------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { Ident, Number, String, Punct, Arrow, End };
    Kind kind = Kind::End;
    std::string text;  // ident/number lexeme, unescaped string content, punct char
    std::string raw;   // strings: the raw lexeme including quotes
    int line = 1, col = 1;

    bool is_punct(char c) const { return kind == Kind::Punct && text.size() == 1 && text[0] == c; }
    bool is_word(const std::string& w) const { return kind == Kind::Ident && text == w; }
};

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_ws_and_comments();
            if (eof()) break;
            out.push_back(token());
        }
        Token end;
        end.kind = Token::Kind::End;
        end.line = line_;
        end.col = col_;
        out.push_back(end);
        return out;
    }

  private:
    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    char take() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_ws_and_comments() {
        while (!eof()) {
            char c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') take();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                take();
            } else {
                break;
            }
        }
    }

    Token token() {
        Token t;
        t.line = line_;
        t.col = col_;
        char c = peek();
        if (ident_start(c)) {
            while (!eof() && ident_char(peek())) t.text += take();
            t.kind = Token::Kind::Ident;
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' ||
            (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] != '>')) {
            return number(t);
        }
        if (c == '"') return string_token(t);
        if (c == '-') {  // must be "->"
            take();
            if (eof() || peek() != '>') throw SyntaxError(t.line, t.col, "'->'");
            take();
            t.kind = Token::Kind::Arrow;
            t.text = "->";
            return t;
        }
        if (std::string("{}():,=[].").find(c) != std::string::npos) {
            t.kind = Token::Kind::Punct;
            t.text = take();
            return t;
        }
        throw SyntaxError(t.line, t.col, "a token (unexpected character '" +
                                             std::string(1, c) + "')");
    }

    Token number(Token t) {
        t.kind = Token::Kind::Number;
        if (peek() == '+' || peek() == '-') t.text += take();
        bool digits = false;
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) {
            t.text += take();
            digits = true;
        }
        if (!digits) throw SyntaxError(t.line, t.col, "a number");
        if (!eof() && peek() == '.') {
            t.text += take();
            while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
        }
        if (!eof() && (peek() == 'e' || peek() == 'E')) {
            t.text += take();
            if (!eof() && (peek() == '+' || peek() == '-')) t.text += take();
            if (eof() || !std::isdigit(static_cast<unsigned char>(peek())))
                throw SyntaxError(line_, col_, "an exponent");
            while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) t.text += take();
        }
        return t;
    }

    Token string_token(Token t) {
        t.kind = Token::Kind::String;
        t.raw += take();  // opening quote
        for (;;) {
            if (eof() || peek() == '\n')
                throw SyntaxError(t.line, t.col, "a closing '\"' on the same line");
            char c = take();
            t.raw += c;
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) throw SyntaxError(line_, col_, "an escape character");
                char e = take();
                t.raw += e;
                switch (e) {
                    case '"': t.text += '"'; break;
                    case '\\': t.text += '\\'; break;
                    case 'n': t.text += '\n'; break;
                    case 't': t.text += '\t'; break;
                    case 'r': t.text += '\r'; break;
                    default:
                        throw SyntaxError(line_, col_ - 1, "a valid escape (\\\" \\\\ \\n \\t \\r)");
                }
            } else {
                t.text += c;
            }
        }
        return t;
    }
};

// Maps a 1-based offset into a string token's unescaped content back to the
// file column of that character (tokens never span lines).
SourcePos string_content_pos(const Token& t, std::size_t off) {
    std::size_t content = 0;
    for (std::size_t i = 1; i + 1 < t.raw.size(); ++i) {
        ++content;
        if (content == off) return {t.line, t.col + static_cast<int>(i)};
        if (t.raw[i] == '\\') ++i;
    }
    return {t.line, t.col + static_cast<int>(t.raw.size()) - 1};  // one past the end
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
  public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Document run() {
        Document doc;
        while (!at_end()) {
            const Token& t = peek();
            if (t.is_word("world")) doc.worlds.push_back(world());
            else if (t.is_word("action")) doc.actions.push_back(action_stub());
            else if (t.is_word("skill")) doc.skills.push_back(skill());
            else if (t.is_word("tree")) doc.trees.push_back(tree());
            else if (t.is_word("goal")) doc.goals.push_back(goal());
            else if (t.is_word("deployment")) doc.deployments.push_back(deployment());
            else fail("'world', 'action', 'skill', 'tree', 'goal' or 'deployment'");
        }
        return doc;
    }

  private:
    std::vector<Token> toks_;
    std::size_t i_ = 0;

    const Token& peek() const { return toks_[i_]; }
    const Token& next() { return toks_[i_++]; }
    bool at_end() const { return peek().kind == Token::Kind::End; }
    [[noreturn]] void fail(const std::string& expected) const {
        throw SyntaxError(peek().line, peek().col, expected);
    }
    SourcePos here() const { return {peek().line, peek().col}; }

    void expect_punct(char c) {
        if (!peek().is_punct(c)) fail("'" + std::string(1, c) + "'");
        next();
    }
    void expect_word(const std::string& w) {
        if (!peek().is_word(w)) fail("'" + w + "'");
        next();
    }
    std::string expect_ident(const std::string& what) {
        if (peek().kind != Token::Kind::Ident) fail(what);
        return next().text;
    }
    Token expect_string(const std::string& what) {
        if (peek().kind != Token::Kind::String) fail(what);
        return next();
    }

    Condition condition_in(const Token& str) {
        if (str.text.empty()) return Condition::always_true();
        try {
            return parse_condition(str.text);
        } catch (const ConditionParseError& e) {
            SourcePos p = string_content_pos(str, e.offset);
            throw SyntaxError(p.line, p.col, e.expected);
        }
    }

    // literal := true | false | NUMBER | STRING | IDENT (enum symbol)
    Value literal() {
        const Token& t = peek();
        if (t.is_word("true")) {
            next();
            return Value::boolean(true);
        }
        if (t.is_word("false")) {
            next();
            return Value::boolean(false);
        }
        if (t.kind == Token::Kind::Number) {
            Token n = next();
            if (n.text.find_first_of(".eE") != std::string::npos)
                return Value::real(std::strtod(n.text.c_str(), nullptr));
            std::int64_t v = 0;
            auto res = std::from_chars(n.text.data(), n.text.data() + n.text.size(), v);
            if (res.ec != std::errc{})
                throw SyntaxError(n.line, n.col, "an integer in range");
            return Value::integer(v);
        }
        if (t.kind == Token::Kind::String) return Value::string(next().text);
        if (t.kind == Token::Kind::Ident) return Value::symbol(next().text);
        fail("a literal");
    }

    // type := bool | int | string | enum | real [ '[' unit ']' ]
    std::pair<ValueType, std::string> type_name(bool allow_unit) {
        const Token& t = peek();
        ValueType vt;
        if (t.is_word("bool")) vt = ValueType::Bool;
        else if (t.is_word("int")) vt = ValueType::Int;
        else if (t.is_word("real")) vt = ValueType::Real;
        else if (t.is_word("string")) vt = ValueType::String;
        else if (t.is_word("enum")) vt = ValueType::Enum;
        else fail("a type ('bool', 'int', 'real', 'string', 'enum')");
        next();
        std::string unit;
        if (vt == ValueType::Real && allow_unit && peek().is_punct('[')) {
            next();
            unit = expect_ident("a unit name");
            expect_punct(']');
        }
        return {vt, unit};
    }

    // coerces a parsed literal to the declared type (ints widen to reals)
    Value typed_literal(ValueType want, const std::string& unit) {
        SourcePos at = here();
        Value v = literal();
        if (want == ValueType::Real && v.type() == ValueType::Int)
            v = Value::real(static_cast<double>(v.as_int()));
        if (want == ValueType::Real && v.type() == ValueType::Real)
            v = Value::real(v.as_real(), unit);
        if (v.type() != want)
            throw SyntaxError(at.line, at.col,
                              "a literal of type " + btweave::to_string(want));
        return v;
    }

    WorldDecl world() {
        WorldDecl w;
        w.pos = here();
        next();  // 'world'
        w.name = expect_ident("a world name");
        expect_punct('{');
        while (!peek().is_punct('}')) {
            VarDecl v;
            v.pos = here();
            expect_word("var");
            v.name = expect_ident("a variable name");
            expect_punct(':');
            std::tie(v.type, v.unit) = type_name(true);
            expect_punct('=');
            v.init = typed_literal(v.type, v.unit);
            w.vars.push_back(std::move(v));
        }
        next();  // '}'
        return w;
    }

    std::vector<ParamSpec> param_list() {
        std::vector<ParamSpec> out;
        expect_punct('(');
        if (!peek().is_punct(')')) {
            for (;;) {
                ParamSpec p;
                p.name = expect_ident("a parameter name");
                expect_punct(':');
                p.type = type_name(false).first;
                if (peek().is_word("in")) p.dir = ParamDir::In;
                else if (peek().is_word("out")) p.dir = ParamDir::Out;
                else fail("'in' or 'out'");
                next();
                out.push_back(std::move(p));
                if (!peek().is_punct(',')) break;
                next();
            }
        }
        expect_punct(')');
        return out;
    }

    ActionDecl action_stub() {
        ActionDecl a;
        a.pos = here();
        next();  // 'action'
        a.name = expect_ident("an action name");
        a.params = param_list();
        return a;
    }

    SkillDecl skill() {
        SkillDecl s;
        s.pos = here();
        next();  // 'skill'
        s.name = expect_ident("a skill name");
        expect_punct('{');
        bool seen_pre = false, seen_inv = false, seen_post = false, seen_action = false,
             seen_priority = false;
        auto once = [&](bool& flag, const char* what) {
            if (flag) fail(std::string("no duplicate '") + what + "' field");
            flag = true;
        };
        while (!peek().is_punct('}')) {
            if (peek().is_word("pre")) {
                once(seen_pre, "pre");
                next();
                expect_punct(':');
                s.pre = condition_in(expect_string("a condition string"));
            } else if (peek().is_word("inv")) {
                once(seen_inv, "inv");
                next();
                expect_punct(':');
                s.inv = condition_in(expect_string("a condition string"));
            } else if (peek().is_word("post")) {
                once(seen_post, "post");
                next();
                expect_punct(':');
                s.post = condition_in(expect_string("a condition string"));
            } else if (peek().is_word("action")) {
                once(seen_action, "action");
                next();
                expect_punct(':');
                s.action = expect_ident("an action name");
            } else if (peek().is_word("priority")) {
                once(seen_priority, "priority");
                next();
                expect_punct(':');
                const Token& t = peek();
                if (t.kind != Token::Kind::Number ||
                    t.text.find_first_of(".eE") != std::string::npos)
                    fail("an integer priority");
                s.priority = std::atoi(next().text.c_str());
            } else if (peek().is_word("param")) {
                SkillParamDecl p;
                p.pos = here();
                next();
                p.spec.name = expect_ident("a parameter name");
                expect_punct(':');
                p.spec.type = type_name(false).first;
                if (peek().is_word("in")) p.spec.dir = ParamDir::In;
                else if (peek().is_word("out")) p.spec.dir = ParamDir::Out;
                else fail("'in' or 'out'");
                next();
                if (peek().kind == Token::Kind::Arrow) {
                    next();
                    p.maps_to = expect_ident("a world variable name");
                } else {
                    p.maps_to = p.spec.name;
                }
                s.params.push_back(std::move(p));
            } else {
                fail("'pre', 'inv', 'post', 'action', 'priority', 'param' or '}'");
            }
        }
        if (!seen_post) fail("a 'post' field before '}'");
        if (!seen_action) fail("an 'action' field before '}'");
        next();  // '}'
        return s;
    }

    Params bindings() {
        Params out;
        expect_punct('(');
        if (!peek().is_punct(')')) {
            for (;;) {
                SourcePos at = here();
                std::string name = expect_ident("a binding name");
                if (out.count(name))
                    throw SyntaxError(at.line, at.col, "a distinct binding name");
                expect_punct('=');
                out.emplace(std::move(name), literal());
                if (!peek().is_punct(',')) break;
                next();
            }
        }
        expect_punct(')');
        return out;
    }

    NodeAst node() {
        NodeAst n;
        n.pos = here();
        if (peek().is_word("fallback") || peek().is_word("sequence") ||
            peek().is_word("sequence_mem")) {
            n.kind = peek().is_word("fallback")    ? NodeAst::Kind::Fallback
                     : peek().is_word("sequence")  ? NodeAst::Kind::Sequence
                                                   : NodeAst::Kind::SequenceMem;
            next();
            expect_punct('{');
            while (!peek().is_punct('}')) n.children.push_back(node());
            next();  // '}'
        } else if (peek().is_word("cond")) {
            n.kind = NodeAst::Kind::Cond;
            next();
            n.cond = condition_in(expect_string("a condition string"));
        } else if (peek().is_word("skill")) {
            n.kind = NodeAst::Kind::SkillRef;
            next();
            n.name = expect_ident("a skill name");
            n.bindings = bindings();
        } else if (peek().is_word("action")) {
            n.kind = NodeAst::Kind::ActionRef;
            next();
            n.name = expect_ident("an action name");
            n.bindings = bindings();
        } else if (peek().is_word("lookup")) {
            n.kind = NodeAst::Kind::Lookup;
            next();
            expect_word("post");
            expect_punct('=');
            n.cond = condition_in(expect_string("a condition string"));
        } else if (peek().is_word("remote")) {
            n.kind = NodeAst::Kind::Remote;
            next();
            n.name = expect_ident("a host name");
            expect_punct('.');
            n.remote_tree = expect_ident("a tree name");
        } else {
            fail("a node ('fallback', 'sequence', 'sequence_mem', 'cond', 'skill', "
                 "'action', 'lookup', 'remote')");
        }
        if (peek().is_word("as")) {
            next();
            n.label = expect_ident("a node label");
        }
        return n;
    }

    TreeDecl tree() {
        TreeDecl t;
        t.pos = here();
        next();  // 'tree'
        t.name = expect_ident("a tree name");
        expect_punct('{');
        t.root = node();
        expect_punct('}');
        return t;
    }

    GoalDecl goal() {
        GoalDecl g;
        g.pos = here();
        next();  // 'goal'
        g.name = expect_ident("a goal name");
        expect_punct('{');
        while (!peek().is_punct('}'))
            g.conditions.push_back(condition_in(expect_string("a condition string")));
        if (g.conditions.empty()) fail("at least one condition string");
        next();  // '}'
        return g;
    }

    std::string dotted_ident(const std::string& what) {
        std::string out = expect_ident(what);
        while (peek().is_punct('.')) {
            next();
            out += "." + expect_ident(what);
        }
        return out;
    }

    HostDecl host() {
        HostDecl h;
        h.pos = here();
        next();  // 'host'
        h.id = expect_ident("a host name");
        expect_punct('{');
        expect_word("tree");
        expect_punct(':');
        h.tree = expect_ident("a tree name");
        expect_word("world");
        expect_punct(':');
        h.world = expect_ident("a world name");
        while (peek().is_word("port")) {
            PortDecl p;
            p.pos = here();
            next();
            if (peek().is_word("in")) p.spec.is_output = false;
            else if (peek().is_word("out")) p.spec.is_output = true;
            else fail("'in' or 'out'");
            next();
            p.spec.name = expect_ident("a port name");
            expect_punct(':');
            std::tie(p.spec.type, p.spec.unit) = type_name(true);
            expect_word("node");
            p.spec.node = dotted_ident("a node label");
            expect_word("var");
            p.spec.variable = expect_ident("a world variable name");
            h.ports.push_back(std::move(p));
        }
        expect_punct('}');
        return h;
    }

    DeploymentDecl deployment() {
        DeploymentDecl d;
        d.pos = here();
        next();  // 'deployment'
        d.name = expect_ident("a deployment name");
        expect_punct('{');
        while (!peek().is_punct('}')) {
            if (peek().is_word("host")) {
                d.hosts.push_back(host());
            } else if (peek().is_word("link")) {
                LinkDecl l;
                l.pos = here();
                next();
                l.link.from_host = expect_ident("a host name");
                expect_punct('.');
                l.link.from_port = expect_ident("a port name");
                if (peek().kind != Token::Kind::Arrow) fail("'->'");
                next();
                l.link.to_host = expect_ident("a host name");
                expect_punct('.');
                l.link.to_port = expect_ident("a port name");
                d.links.push_back(std::move(l));
            } else {
                fail("'host', 'link' or '}'");
            }
        }
        next();  // '}'
        return d;
    }
};

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

void walk_nodes(const NodeAst& n, const std::function<void(const NodeAst&)>& f) {
    f(n);
    for (const NodeAst& c : n.children) walk_nodes(c, f);
}

void resolve(const Document& doc) {
    std::vector<std::string> issues;
    auto issue = [&](const SourcePos& p, const std::string& text) {
        issues.push_back(p.to_string() + ": " + text);
    };
    auto check_dups = [&](auto&& decls, const char* what, auto&& name_of) {
        std::set<std::string> seen;
        for (const auto& d : decls)
            if (!seen.insert(name_of(d)).second)
                issue(d.pos, std::string("duplicate ") + what + " '" + name_of(d) + "'");
    };
    check_dups(doc.worlds, "world", [](const WorldDecl& d) { return d.name; });
    check_dups(doc.actions, "action", [](const ActionDecl& d) { return d.name; });
    check_dups(doc.skills, "skill", [](const SkillDecl& d) { return d.name; });
    check_dups(doc.trees, "tree", [](const TreeDecl& d) { return d.name; });
    check_dups(doc.goals, "goal", [](const GoalDecl& d) { return d.name; });
    check_dups(doc.deployments, "deployment",
               [](const DeploymentDecl& d) { return d.name; });

    std::set<std::string> action_names, skill_names;
    for (const ActionDecl& a : doc.actions) action_names.insert(a.name);
    for (const SkillDecl& s : doc.skills) skill_names.insert(s.name);

    for (const SkillDecl& s : doc.skills)
        if (!action_names.count(s.action))
            issue(s.pos, "skill '" + s.name + "' references unknown action '" + s.action + "'");

    for (const TreeDecl& t : doc.trees) {
        std::set<std::string> labels;
        walk_nodes(t.root, [&](const NodeAst& n) {
            if (!n.label.empty() && !labels.insert(n.label).second)
                issue(n.pos, "tree '" + t.name + "': duplicate label '" + n.label + "'");
            if (n.kind == NodeAst::Kind::SkillRef && !skill_names.count(n.name))
                issue(n.pos, "tree '" + t.name + "' references unknown skill '" + n.name + "'");
            if (n.kind == NodeAst::Kind::ActionRef && !action_names.count(n.name))
                issue(n.pos, "tree '" + t.name + "' references unknown action '" + n.name + "'");
        });
    }

    for (const DeploymentDecl& d : doc.deployments) {
        std::set<std::string> host_ids;
        for (const HostDecl& h : d.hosts) {
            if (!host_ids.insert(h.id).second)
                issue(h.pos, "deployment '" + d.name + "': duplicate host '" + h.id + "'");
            if (!doc.find_tree(h.tree))
                issue(h.pos, "host '" + h.id + "' references unknown tree '" + h.tree + "'");
            if (!doc.find_world(h.world))
                issue(h.pos, "host '" + h.id + "' references unknown world '" + h.world + "'");
        }
        auto port_of = [&](const std::string& host, const std::string& port) -> bool {
            for (const HostDecl& h : d.hosts)
                if (h.id == host)
                    for (const PortDecl& p : h.ports)
                        if (p.spec.name == port) return true;
            return false;
        };
        for (const LinkDecl& l : d.links) {
            if (!host_ids.count(l.link.from_host) || !port_of(l.link.from_host, l.link.from_port))
                issue(l.pos, "link references unknown port '" + l.link.from_host + "." +
                                 l.link.from_port + "'");
            if (!host_ids.count(l.link.to_host) || !port_of(l.link.to_host, l.link.to_port))
                issue(l.pos, "link references unknown port '" + l.link.to_host + "." +
                                 l.link.to_port + "'");
        }
        // remote leaves inside the deployment's trees must address its hosts
        for (const HostDecl& h : d.hosts) {
            const TreeDecl* t = doc.find_tree(h.tree);
            if (!t) continue;
            walk_nodes(t->root, [&](const NodeAst& n) {
                if (n.kind != NodeAst::Kind::Remote) return;
                bool ok = false;
                for (const HostDecl& peer : d.hosts)
                    if (peer.id == n.name && peer.tree == n.remote_tree) ok = true;
                if (!ok)
                    issue(n.pos, "deployment '" + d.name + "': remote '" + n.name + "." +
                                     n.remote_tree + "' matches no host");
            });
        }
    }

    if (!issues.empty()) throw ResolutionError(std::move(issues));
}

}  // namespace

const WorldDecl* Document::find_world(const std::string& name) const {
    for (const auto& w : worlds)
        if (w.name == name) return &w;
    return nullptr;
}
const TreeDecl* Document::find_tree(const std::string& name) const {
    for (const auto& t : trees)
        if (t.name == name) return &t;
    return nullptr;
}
const GoalDecl* Document::find_goal(const std::string& name) const {
    for (const auto& g : goals)
        if (g.name == name) return &g;
    return nullptr;
}
const DeploymentDecl* Document::find_deployment(const std::string& name) const {
    for (const auto& d : deployments)
        if (d.name == name) return &d;
    return nullptr;
}

Document parse_document(const std::string& text) {
    Document doc = Parser(Lexer(text).run()).run();
    resolve(doc);
    return doc;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

std::string dsl_string(const std::string& content) {
    std::string out = "\"";
    for (char c : content) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string type_text(ValueType t, const std::string& unit) {
    std::string out = to_string(t);
    if (t == ValueType::Real && !unit.empty()) out += " [" + unit + "]";
    return out;
}

std::string bindings_text(const Params& b) {
    std::string out = "(";
    bool first = true;
    for (const auto& [name, value] : b) {
        if (!first) out += ", ";
        first = false;
        out += name + " = " + value.to_string();
    }
    return out + ")";
}

std::string dir_text(ParamDir d) { return d == ParamDir::In ? "in" : "out"; }

void print_node(std::ostringstream& out, const NodeAst& n, int depth) {
    const std::string ind(static_cast<std::size_t>(depth) * 2, ' ');
    const std::string tail = n.label.empty() ? "" : " as " + n.label;
    switch (n.kind) {
        case NodeAst::Kind::Fallback:
        case NodeAst::Kind::Sequence:
        case NodeAst::Kind::SequenceMem: {
            const char* kw = n.kind == NodeAst::Kind::Fallback    ? "fallback"
                             : n.kind == NodeAst::Kind::Sequence  ? "sequence"
                                                                  : "sequence_mem";
            out << ind << kw << " {\n";
            for (const NodeAst& c : n.children) print_node(out, c, depth + 1);
            out << ind << "}" << tail << "\n";
            return;
        }
        case NodeAst::Kind::Cond:
            out << ind << "cond " << dsl_string(n.cond.to_string()) << tail << "\n";
            return;
        case NodeAst::Kind::SkillRef:
            out << ind << "skill " << n.name << bindings_text(n.bindings) << tail << "\n";
            return;
        case NodeAst::Kind::ActionRef:
            out << ind << "action " << n.name << bindings_text(n.bindings) << tail << "\n";
            return;
        case NodeAst::Kind::Lookup:
            out << ind << "lookup post = " << dsl_string(n.cond.to_string()) << tail << "\n";
            return;
        case NodeAst::Kind::Remote:
            out << ind << "remote " << n.name << "." << n.remote_tree << tail << "\n";
            return;
    }
}

}  // namespace

std::string print_document(const Document& doc) {
    std::ostringstream out;
    bool first = true;
    auto sep = [&] {
        if (!first) out << "\n";
        first = false;
    };

    for (const WorldDecl& w : doc.worlds) {
        sep();
        out << "world " << w.name << " {\n";
        for (const VarDecl& v : w.vars)
            out << "  var " << v.name << ": " << type_text(v.type, v.unit) << " = "
                << v.init.to_string() << "\n";
        out << "}\n";
    }
    for (const ActionDecl& a : doc.actions) {
        sep();
        out << "action " << a.name << "(";
        for (std::size_t i = 0; i < a.params.size(); ++i) {
            if (i) out << ", ";
            out << a.params[i].name << ": " << to_string(a.params[i].type) << " "
                << dir_text(a.params[i].dir);
        }
        out << ")\n";
    }
    for (const SkillDecl& s : doc.skills) {
        sep();
        out << "skill " << s.name << " {\n";
        if (!s.pre.empty()) out << "  pre: " << dsl_string(s.pre.to_string()) << "\n";
        if (!s.inv.empty()) out << "  inv: " << dsl_string(s.inv.to_string()) << "\n";
        out << "  post: " << dsl_string(s.post.to_string()) << "\n";
        out << "  action: " << s.action << "\n";
        if (s.priority != 0) out << "  priority: " << s.priority << "\n";
        for (const SkillParamDecl& p : s.params)
            out << "  param " << p.spec.name << ": " << to_string(p.spec.type) << " "
                << dir_text(p.spec.dir) << " -> " << p.maps_to << "\n";
        out << "}\n";
    }
    for (const TreeDecl& t : doc.trees) {
        sep();
        out << "tree " << t.name << " {\n";
        print_node(out, t.root, 1);
        out << "}\n";
    }
    for (const GoalDecl& g : doc.goals) {
        sep();
        out << "goal " << g.name << " {\n";
        for (const Condition& c : g.conditions)
            out << "  " << dsl_string(c.to_string()) << "\n";
        out << "}\n";
    }
    for (const DeploymentDecl& d : doc.deployments) {
        sep();
        out << "deployment " << d.name << " {\n";
        for (const HostDecl& h : d.hosts) {
            out << "  host " << h.id << " {\n";
            out << "    tree: " << h.tree << "\n";
            out << "    world: " << h.world << "\n";
            for (const PortDecl& p : h.ports)
                out << "    port " << (p.spec.is_output ? "out" : "in") << " " << p.spec.name
                    << ": " << type_text(p.spec.type, p.spec.unit) << " node " << p.spec.node
                    << " var " << p.spec.variable << "\n";
            out << "  }\n";
        }
        for (const LinkDecl& l : d.links)
            out << "  link " << l.link.from_host << "." << l.link.from_port << " -> "
                << l.link.to_host << "." << l.link.to_port << "\n";
        out << "}\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Instantiation
// ---------------------------------------------------------------------------

WorldState instantiate_world(const WorldDecl& w) {
    WorldState out;
    for (const VarDecl& v : w.vars) out.declare(v.name, v.init);
    return out;
}

SkillRegistry skills_from(const Document& doc) {
    SkillRegistry reg;
    for (const SkillDecl& s : doc.skills) {
        Skill sk;
        sk.name = s.name;
        sk.pre = s.pre;
        sk.inv = s.inv;
        sk.post = s.post;
        sk.action = s.action;
        sk.priority = s.priority;
        SkillInterface si;
        for (const SkillParamDecl& p : s.params) {
            si.params.push_back(p.spec);
            si.mapping[p.spec.name] = p.maps_to;
        }
        reg.register_skill(std::move(sk), std::move(si));
    }
    return reg;
}

ActionRegistry stub_actions(const Document& doc) {
    ActionRegistry reg;
    for (const ActionDecl& a : doc.actions)
        reg.add(ActionImpl{
            a.name,
            [](WorldState&, const Params&) { return Status::Running; },
            nullptr,
        });
    return reg;
}

Goal goal_from(const GoalDecl& g) { return Goal{g.conditions}; }

namespace {

struct TreeBuilder {
    const Document& doc;
    const ActionRegistry& actions;
    SkillRegistry skills;
    int counter = 0;

    std::string fresh(const NodeAst& n) {
        static const char* words[] = {"fallback", "sequence", "sequence_mem", "cond",
                                      "skill",    "action",   "lookup",       "remote"};
        const std::string base = words[static_cast<int>(n.kind)];
        const int k = counter++;
        return n.label.empty() ? base + "#" + std::to_string(k) : n.label;
    }

    TreeNodePtr build(const NodeAst& n) {
        const std::string id = fresh(n);
        switch (n.kind) {
            case NodeAst::Kind::Fallback:
            case NodeAst::Kind::Sequence:
            case NodeAst::Kind::SequenceMem: {
                std::vector<TreeNodePtr> kids;
                for (const NodeAst& c : n.children) kids.push_back(build(c));
                if (n.kind == NodeAst::Kind::Fallback)
                    return TreeNode::fallback(id, std::move(kids));
                if (n.kind == NodeAst::Kind::Sequence)
                    return TreeNode::sequence(id, std::move(kids));
                return TreeNode::sequence_mem(id, std::move(kids));
            }
            case NodeAst::Kind::Cond:
                return TreeNode::condition(id, n.cond);
            case NodeAst::Kind::SkillRef: {
                const Skill& s = skills.find(n.name);
                return expand_skill(s, skills.interface_of(n.name), n.bindings, actions, id);
            }
            case NodeAst::Kind::ActionRef:
                return TreeNode::action(id, n.name, n.bindings);
            case NodeAst::Kind::Lookup: {
                TreeNodePtr lk = TreeNode::lookup(id, n.cond);
                if (TreeNodePtr sub =
                        build_lookup_subtree(n.cond, skills, actions, id + ".bind"))
                    lk->children.push_back(std::move(sub));
                return lk;
            }
            case NodeAst::Kind::Remote:
                return TreeNode::remote(id, n.name, n.remote_tree);
        }
        throw Error("unreachable node kind");
    }
};

}  // namespace

TreeNodePtr instantiate_tree(const TreeDecl& t, const Document& doc,
                             const ActionRegistry& actions) {
    TreeBuilder b{doc, actions, skills_from(doc), 0};
    TreeNodePtr root = b.build(t.root);
    root->validate();
    return root;
}

Deployment instantiate_deployment(const DeploymentDecl& dep, const Document& doc,
                                  const ActionRegistry& actions) {
    Deployment d;
    for (const HostDecl& h : dep.hosts) {
        const TreeDecl* tree = doc.find_tree(h.tree);
        const WorldDecl* world = doc.find_world(h.world);
        if (!tree) throw Error("host '" + h.id + "' references unknown tree '" + h.tree + "'");
        if (!world)
            throw Error("host '" + h.id + "' references unknown world '" + h.world + "'");
        HostSpec spec;
        spec.id = h.id;
        spec.tree_name = h.tree;
        spec.tree = instantiate_tree(*tree, doc, actions);
        spec.world = instantiate_world(*world);
        spec.actions = &actions;
        for (const PortDecl& p : h.ports) spec.ports.push_back(p.spec);
        d.hosts.push_back(std::move(spec));
    }
    for (const LinkDecl& l : dep.links) d.data_links.push_back(l.link);
    return d;
}

NodeAst ast_from_tree(const TreeNode& n) {
    NodeAst out;
    switch (n.kind) {
        case NodeKind::Fallback: out.kind = NodeAst::Kind::Fallback; break;
        case NodeKind::Sequence: out.kind = NodeAst::Kind::Sequence; break;
        case NodeKind::SequenceMem: out.kind = NodeAst::Kind::SequenceMem; break;
        case NodeKind::Condition:
            out.kind = NodeAst::Kind::Cond;
            out.cond = n.cond;
            return out;
        case NodeKind::Action:
            out.kind = NodeAst::Kind::ActionRef;
            out.name = n.action_name;
            out.bindings = n.bindings;
            return out;
        case NodeKind::Lookup:
            out.kind = NodeAst::Kind::Lookup;
            out.cond = n.cond;
            return out;  // adopted child re-binds at instantiation
        case NodeKind::Remote:
            out.kind = NodeAst::Kind::Remote;
            out.name = n.remote_host;
            out.remote_tree = n.remote_tree;
            return out;
    }
    for (const TreeNodePtr& c : n.children) out.children.push_back(ast_from_tree(*c));
    return out;
}

}  // namespace btweave
