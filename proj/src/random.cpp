#include "gvfswitch/random.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "gvfswitch/common.hpp"

namespace gvfswitch {

double Rng::normal() {
  if (spare_) {
    const double out = *spare_;
    spare_.reset();
    return out;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

const char* joint_name(int joint) {
  switch (joint) {
    case kShoulder: return "shoulder";
    case kElbow: return "elbow";
    case kWrist: return "wrist";
    case kGripper: return "gripper";
    default: return "unknown";
  }
}

}  // namespace gvfswitch
