#ifndef GVFSWITCH_COMMON_HPP
#define GVFSWITCH_COMMON_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gvfswitch {

inline constexpr int kNumJoints = 4;
inline constexpr double kDefaultTickRateHz = 15.0;

// Joint order is fixed: shoulder, elbow, wrist, gripper.
enum Joint : int { kShoulder = 0, kElbow = 1, kWrist = 2, kGripper = 3 };

using JointArray = std::array<double, kNumJoints>;

const char* joint_name(int joint);

/// 16 lowercase hex digits.
std::string hash_hex(std::uint64_t hash);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a TD error stops being finite; carries the offending question.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string question_id, const std::string& what)
      : std::runtime_error(what), question_id_(std::move(question_id)) {}
  const std::string& question_id() const { return question_id_; }

 private:
  std::string question_id_;
};

}  // namespace gvfswitch

#endif
