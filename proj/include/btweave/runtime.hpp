#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "btweave/bt.hpp"
#include "btweave/executor.hpp"
#include "btweave/wire.hpp"
#include "btweave/world_state.hpp"

namespace btweave {

// ---------------------------------------------------------------------------
// Deployment model
//
// A deployment is a set of node hosts, each owning one named tree and one
// world. Control links are derived from `remote <host>.<tree>` leaves and
// must form a rooted tree (the snowflake); typed data links connect leaf
// ports with last-value semantics at the receiver.
// ---------------------------------------------------------------------------

struct DataPortSpec {
    std::string name;      // unique per host
    std::string node;      // id of the owning tree leaf
    std::string variable;  // world variable the port reads (out) or writes (in)
    ValueType type = ValueType::Real;
    std::string unit;      // for reals
    bool is_output = false;

    bool operator==(const DataPortSpec&) const = default;
};

struct DataLink {
    std::string from_host, from_port;  // an output port
    std::string to_host, to_port;      // an input port

    bool operator==(const DataLink&) const = default;
};

struct HostSpec {
    std::string id;
    std::string tree_name;
    TreeNodePtr tree;
    WorldState world;
    const ActionRegistry* actions = nullptr;
    std::vector<DataPortSpec> ports;
    std::function<void(WorldState&)> post_tick;  // per-host plant hook
};

struct Deployment {
    std::vector<HostSpec> hosts;
    std::vector<DataLink> data_links;

    const HostSpec* find_host(const std::string& id) const;
    HostSpec* find_host(const std::string& id);
};

// ---------------------------------------------------------------------------
// Topology validation
// ---------------------------------------------------------------------------

struct ValidationReport {
    bool ok = false;
    std::vector<std::string> violations;
    std::string root_host;  // set when the control graph has a unique root

    std::string to_text() const;
};

ValidationReport validate_topology(const Deployment& d);

// ---------------------------------------------------------------------------
// Data bus (standalone port/link runtime; also used by run_deployment)
// ---------------------------------------------------------------------------

class DataBus {
  public:
    explicit DataBus(const Deployment& d);

    // pushes a value out of an output port into its peer's last-value cache;
    // control statuses are never touched
    void transfer(const std::string& host, const std::string& port, const Value& v);

    // last value received by an input port, if any
    std::optional<Value> last(const std::string& host, const std::string& port) const;

  private:
    struct PortKey {
        std::string host, port;
        bool operator<(const PortKey& o) const {
            return std::tie(host, port) < std::tie(o.host, o.port);
        }
    };
    std::map<PortKey, DataPortSpec> ports_;
    std::map<PortKey, PortKey> link_of_;  // out-port -> in-port
    std::map<PortKey, Value> cache_;      // in-port -> last value
};

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

enum class RunMode { Lockstep, Async };

struct DeployOptions {
    RunMode mode = RunMode::Lockstep;
    int max_ticks = 100;
    bool stop_on_failure = true;
    // lockstep only: every host executes against the root host's world —
    // the degenerate single-blackboard deployment used by equivalence tests
    bool shared_world = false;
    // async only
    std::uint64_t seed = 1;
    double timeout_factor = 10.0;  // proxy timeout T = factor * dt
    double delay_min = 0.10;       // message delay, in units of dt
    double delay_max = 0.60;
    std::set<std::string> crashed_hosts;  // never process any message
};

struct LinkLog {
    std::string parent_host, child_host, leaf;
    std::vector<std::string> lines;  // encoded wire messages, in order sent
};

struct DeployResult {
    Status status = Status::Running;  // last root status
    int ticks = 0;                    // global ticks executed
    TickTrace trace;                  // merged trace, true temporal order
    std::vector<Status> root_status_per_tick;
    std::vector<LinkLog> link_logs;   // control links only
    std::map<std::string, WorldState> final_worlds;  // by host id
};

// Executes a validated deployment. Throws Error when validate_topology
// reports violations, and TransportError on conformance-monitor rejection.
DeployResult run_deployment(Deployment& d, const DeployOptions& opts = {});

// ---------------------------------------------------------------------------
// Stream-socket transport: one link endpoint speaking wire messages over a
// localhost TCP connection (newline-delimited). The listening side answers
// each request line via the supplied handler. BTWEAVE_LISTEN selects the
// bind address when the caller passes an empty one.
// ---------------------------------------------------------------------------

class TcpServer {
  public:
    // bind_addr "host:port"; empty -> $BTWEAVE_LISTEN or 127.0.0.1:0
    explicit TcpServer(const std::string& bind_addr);
    ~TcpServer();
    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    int port() const { return port_; }
    // accepts one connection and serves request/reply lines until the peer
    // closes; returns the number of requests served
    std::size_t serve_one(const std::function<std::string(const std::string&)>& handler);

  private:
    int fd_ = -1;
    int port_ = 0;
};

class TcpClient {
  public:
    TcpClient(const std::string& host, int port);
    ~TcpClient();
    TcpClient(const TcpClient&) = delete;
    TcpClient& operator=(const TcpClient&) = delete;

    // sends one line (newline appended if missing) and reads one reply line
    std::string request(const std::string& line);

  private:
    int fd_ = -1;
    std::string buffer_;
};

}  // namespace btweave
