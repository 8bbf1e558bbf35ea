#pragma once

// Operator session: one control loop, a command queue applied at tick
// boundaries, single-operator role, record/replay modes and decimated
// telemetry. The Session object belongs to the simulation thread; only
// CommandQueue is shared with network threads.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pneumahand/config.hpp"
#include "pneumahand/records.hpp"

namespace pneumahand {

using ClientId = std::uint64_t;

enum class SessionMode { Idle, Live, Recording, Replaying, Experiment };
std::string_view session_mode_name(SessionMode m);

struct Inbound {
  enum class Kind { Connect, Disconnect, Message };
  Kind kind = Kind::Message;
  ClientId client = 0;
  std::string text;
  std::uint64_t seq = 0;  // receipt order across all connections
};

// Multi-producer queue stamped in receipt order.
class CommandQueue {
public:
  void push(Inbound::Kind kind, ClientId client, std::string text = {});
  std::vector<Inbound> drain();
  bool wait_for(double seconds);

private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Inbound> items_;
  std::uint64_t next_seq_ = 0;
};

struct Outbound {
  std::optional<ClientId> client;  // nullopt: broadcast
  std::string text;
};

class Session {
public:
  explicit Session(AppConfig cfg, std::optional<PostureLibrary> library = {});

  // Applies queued events in order, then advances one control tick.
  void tick(const std::vector<Inbound>& events);
  void apply(const Inbound& event);
  void step();
  // Messages produced since the last call.
  std::vector<Outbound> take_outbox();

  SessionMode mode() const { return mode_; }
  std::optional<ClientId> operator_client() const { return operator_; }
  int client_count() const { return static_cast<int>(clients_.size()); }
  const ControlLoop& loop() const { return loop_; }
  const PostureLibrary& library() const { return library_; }
  const AppConfig& config() const { return cfg_; }
  std::uint64_t decimation() const { return decimation_; }

  SessionSnapshot snapshot() const;
  // Restores clock, plant, estimates, setpoints and library. Rejects a
  // snapshot taken under a different config.
  void restore(const SessionSnapshot& snap);

  // Persist to cfg.session_file when set.
  void persist() const;

private:
  void handle_message(ClientId client, const std::string& text);
  nlohmann::json run_command(ClientId client, const std::string& command, const nlohmann::json& args);
  void require_operator(ClientId client) const;
  void set_mode(SessionMode m);
  void emit_telemetry();
  void send(std::optional<ClientId> to, const nlohmann::json& msg);

  AppConfig cfg_;
  ControlLoop loop_;
  PostureLibrary library_;
  SessionMode mode_ = SessionMode::Idle;
  std::vector<ClientId> clients_;
  std::optional<ClientId> operator_;
  std::uint64_t decimation_;
  std::uint64_t last_telemetry_tick_ = 0;
  bool telemetry_sent_ = false;
  bool dirty_library_ = false;

  std::optional<SynergyRecorder> recorder_;
  std::uint64_t record_start_ = 0;
  std::optional<SynergyReplay> replay_;
  std::uint64_t replay_start_ = 0;

  std::vector<Outbound> outbox_;
};

}  // namespace pneumahand
