#ifndef GVFSWITCH_TELEMETRY_HPP
#define GVFSWITCH_TELEMETRY_HPP

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gvfswitch/session_io.hpp"

namespace gvfswitch {

enum class CommandKind { Drive, Switch, SetAutonomy, ToggleLearning, SaveModel };

const char* command_name(CommandKind kind);

struct Command {
  CommandKind kind = CommandKind::Switch;
  double value = 0.0;            // drive
  Autonomy autonomy = Autonomy::Manual;
  bool on = true;                // toggle-learning
  std::string path;              // save-model
  std::optional<std::string> id; // echoed in the reply
  int client = 0;                // connection that sent it; 0 = local
};

class CommandError : public std::runtime_error {
 public:
  CommandError(std::string command, const std::string& reason, std::optional<std::string> id = std::nullopt)
      : std::runtime_error(reason), command_(std::move(command)), id_(std::move(id)) {}
  const std::string& command() const { return command_; }
  const std::optional<std::string>& id() const { return id_; }

 private:
  std::string command_;
  std::optional<std::string> id_;
};

/// Accepts the text form ("drive 0.5", "set-autonomy auto") or a JSON object
/// {"cmd": "drive", "value": 0.5, "id": "..."}. Throws CommandError.
Command parse_command(const std::string& text);

struct EngineEvent {
  enum class Kind { Switch, AlarmRise, Override };
  Kind kind = Kind::Switch;
  std::int64_t tick = 0;
  int from = 0;
  int to = 0;
  SwitchSource source = SwitchSource::None;
};

const char* event_kind_name(EngineEvent::Kind kind);

std::string state_message(const SessionLogRecord& record, const std::vector<std::string>& question_ids,
                          bool learning);
std::string event_message(const EngineEvent& event);
std::string ack_message(const Command& command, std::int64_t tick);
std::string error_message(const std::string& command, const std::string& reason,
                          const std::optional<std::string>& id = std::nullopt);
std::string hello_message(const std::string& role, const std::vector<std::string>& question_ids,
                          const std::string& mode, double tick_rate_hz);

/// Message type field of a serialized message.
std::string message_type(const std::string& message);

/// Mutex-guarded FIFO with a fixed capacity. A push onto a full queue evicts
/// the oldest entry and counts it.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("queue capacity must be > 0");
  }

  /// Returns true when an older entry was dropped to make room.
  bool push(T value) {
    bool dropped = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (items_.size() >= capacity_) {
        items_.pop_front();
        ++dropped_;
        dropped = true;
      }
      items_.push_back(std::move(value));
    }
    cv_.notify_one();
    return dropped;
  }

  std::optional<T> try_pop() {
    std::lock_guard<std::mutex> lock(mu_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::optional<T> pop_for(std::chrono::milliseconds timeout) {
    std::unique_lock<std::mutex> lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !items_.empty(); })) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::vector<T> drain() {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
    items_.clear();
    return out;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t dropped() const {
    std::lock_guard<std::mutex> lock(mu_);
    return dropped_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::uint64_t dropped_ = 0;
};

}  // namespace gvfswitch

#endif
