#include "btweave/bt.hpp"

#include <charconv>
#include <set>

#include "btweave/errors.hpp"

namespace btweave {

char to_char(Status s) {
    switch (s) {
        case Status::Running: return 'R';
        case Status::Success: return 'S';
        case Status::Failure: return 'F';
    }
    return '?';
}

std::string to_string(Status s) {
    switch (s) {
        case Status::Running: return "Running";
        case Status::Success: return "Success";
        case Status::Failure: return "Failure";
    }
    return "?";
}

Status status_from_char(char c) {
    switch (c) {
        case 'R': return Status::Running;
        case 'S': return Status::Success;
        case 'F': return Status::Failure;
    }
    throw Error(std::string("not a status letter: '") + c + "'");
}

std::string to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Sequence: return "sequence";
        case NodeKind::Fallback: return "fallback";
        case NodeKind::SequenceMem: return "sequence_mem";
        case NodeKind::Condition: return "cond";
        case NodeKind::Action: return "action";
        case NodeKind::Lookup: return "lookup";
        case NodeKind::Remote: return "remote";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// ActionRegistry
// ---------------------------------------------------------------------------

void ActionRegistry::add(ActionImpl impl) {
    if (actions_.count(impl.name)) throw DuplicateActionError(impl.name);
    std::string name = impl.name;
    actions_.emplace(std::move(name), std::move(impl));
}

const ActionImpl& ActionRegistry::find(const std::string& n) const {
    auto it = actions_.find(n);
    if (it == actions_.end()) throw UnboundActionError(n);
    return it->second;
}

bool ActionRegistry::has(const std::string& n) const { return actions_.count(n) > 0; }

// ---------------------------------------------------------------------------
// TreeNode
// ---------------------------------------------------------------------------

namespace {

TreeNodePtr make_node(NodeKind kind, std::string id) {
    auto n = std::make_unique<TreeNode>();
    n->kind = kind;
    n->id = std::move(id);
    return n;
}

}  // namespace

TreeNodePtr TreeNode::sequence(std::string id, std::vector<TreeNodePtr> children) {
    auto n = make_node(NodeKind::Sequence, std::move(id));
    n->children = std::move(children);
    return n;
}

TreeNodePtr TreeNode::fallback(std::string id, std::vector<TreeNodePtr> children) {
    auto n = make_node(NodeKind::Fallback, std::move(id));
    n->children = std::move(children);
    return n;
}

TreeNodePtr TreeNode::sequence_mem(std::string id, std::vector<TreeNodePtr> children) {
    auto n = make_node(NodeKind::SequenceMem, std::move(id));
    n->children = std::move(children);
    return n;
}

TreeNodePtr TreeNode::condition(std::string id, Condition c) {
    auto n = make_node(NodeKind::Condition, std::move(id));
    n->cond = std::move(c);
    return n;
}

TreeNodePtr TreeNode::action(std::string id, std::string action_name, Params bindings) {
    auto n = make_node(NodeKind::Action, std::move(id));
    n->action_name = std::move(action_name);
    n->bindings = std::move(bindings);
    return n;
}

TreeNodePtr TreeNode::lookup(std::string id, Condition wanted_post) {
    auto n = make_node(NodeKind::Lookup, std::move(id));
    n->cond = std::move(wanted_post);
    return n;
}

TreeNodePtr TreeNode::remote(std::string id, std::string host, std::string tree) {
    auto n = make_node(NodeKind::Remote, std::move(id));
    n->remote_host = std::move(host);
    n->remote_tree = std::move(tree);
    return n;
}

TreeNodePtr TreeNode::clone() const {
    auto n = make_node(kind, id);
    n->cond = cond;
    n->action_name = action_name;
    n->bindings = bindings;
    n->remote_host = remote_host;
    n->remote_tree = remote_tree;
    for (const TreeNodePtr& c : children) n->children.push_back(c->clone());
    return n;
}

namespace {

void validate_rec(const TreeNode& n, std::set<std::string>& ids) {
    if (n.id.empty()) throw Error("tree node without id");
    if (!ids.insert(n.id).second) throw Error("duplicate node id '" + n.id + "'");
    switch (n.kind) {
        case NodeKind::Condition:
        case NodeKind::Action:
        case NodeKind::Remote:
            if (!n.children.empty())
                throw Error("leaf node '" + n.id + "' must not have children");
            break;
        case NodeKind::Lookup:
            if (n.children.size() > 1)
                throw Error("lookup '" + n.id + "' may have at most one child");
            break;
        default:
            break;
    }
    for (const TreeNodePtr& c : n.children) validate_rec(*c, ids);
}

}  // namespace

void TreeNode::validate() const {
    std::set<std::string> ids;
    validate_rec(*this, ids);
}

// ---------------------------------------------------------------------------
// TickTrace text format
// ---------------------------------------------------------------------------

std::string TickTrace::to_text() const {
    std::string out;
    for (const TickRecord& r : records) {
        out += "k=" + std::to_string(r.k) + " node=" + r.node + " status=";
        out += to_char(r.status);
        out += " t=" + format_real(r.t) + "\n";
    }
    return out;
}

namespace {

// Consumes `key=` at text[pos] and returns the value up to the next space or
// newline. offset bookkeeping is 0-based into the full text.
std::string take_field(const std::string& text, std::size_t& pos, const std::string& key) {
    const std::string prefix = key + "=";
    if (text.compare(pos, prefix.size(), prefix) != 0)
        throw DecodeError(pos, "expected '" + prefix + "'");
    pos += prefix.size();
    std::size_t end = text.find_first_of(" \n", pos);
    if (end == std::string::npos) throw DecodeError(pos, "unterminated record");
    std::string v = text.substr(pos, end - pos);
    pos = end;
    return v;
}

void skip_sep(const std::string& text, std::size_t& pos, char want) {
    if (pos >= text.size() || text[pos] != want)
        throw DecodeError(pos, std::string("expected '") + want + "'");
    ++pos;
}

}  // namespace

TickTrace TickTrace::from_text(const std::string& text) {
    TickTrace t;
    std::size_t pos = 0;
    while (pos < text.size()) {
        TickRecord r;
        std::string k = take_field(text, pos, "k");
        auto res = std::from_chars(k.data(), k.data() + k.size(), r.k);
        if (res.ec != std::errc{} || res.ptr != k.data() + k.size())
            throw DecodeError(pos, "integer tick index");
        skip_sep(text, pos, ' ');
        r.node = take_field(text, pos, "node");
        skip_sep(text, pos, ' ');
        std::string s = take_field(text, pos, "status");
        if (s.size() != 1) throw DecodeError(pos, "one-letter status");
        r.status = status_from_char(s[0]);
        skip_sep(text, pos, ' ');
        std::string tv = take_field(text, pos, "t");
        try {
            r.t = std::stod(tv);
        } catch (const std::exception&) {
            throw DecodeError(pos, "real clock value");
        }
        skip_sep(text, pos, '\n');
        t.records.push_back(std::move(r));
    }
    return t;
}

}  // namespace btweave
