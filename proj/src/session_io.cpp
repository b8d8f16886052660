#include "gvfswitch/session_io.hpp"

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace gvfswitch {

namespace {

constexpr const char* kRecordKeys[] = {"t",   "time", "emg",  "pos",  "vel",  "pulse", "joint", "mav",
                                       "drive", "sw", "pred", "mat", "alarm", "rank", "sugg",  "act",
                                       "lead", "auto", "src",  "to",   "cfg"};
constexpr std::size_t kNumRecordKeys = sizeof(kRecordKeys) / sizeof(kRecordKeys[0]);

void append_hex(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  out += buf;
}

void append_joints(std::string& out, const JointArray& a) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (i) out += ',';
    append_hex(out, a[i]);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(const std::string& s, const char* field) {
  if (s.empty()) throw FormatError(std::string("empty number in field '") + field + "'");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw FormatError(std::string("bad number '") + s + "' in field '" + field + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const char* field) {
  if (s.empty()) throw FormatError(std::string("empty integer in field '") + field + "'");
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw FormatError(std::string("bad integer '") + s + "' in field '" + field + "'");
  }
  return v;
}

std::uint64_t parse_hash(const std::string& s) {
  if (s.size() != 16) throw FormatError("config hash must be 16 hex digits");
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 16);
  if (end != s.c_str() + s.size()) throw FormatError("bad config hash '" + s + "'");
  return v;
}

JointArray parse_joints(const std::string& s, const char* field) {
  const auto parts = split(s, ',');
  if (parts.size() != kNumJoints) throw FormatError(std::string("field '") + field + "' needs 4 values");
  JointArray a{};
  for (int i = 0; i < kNumJoints; ++i) a[i] = parse_double(parts[i], field);
  return a;
}

int parse_joint(const std::string& s, const char* field) {
  const auto v = parse_int(s, field);
  if (v < 0 || v >= kNumJoints) throw FormatError(std::string("joint out of range in field '") + field + "'");
  return static_cast<int>(v);
}

SwitchSource parse_source(const std::string& s) {
  if (s == "none") return SwitchSource::None;
  if (s == "user") return SwitchSource::User;
  if (s == "auto") return SwitchSource::Auto;
  throw FormatError("unknown switch source: " + s);
}

void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& b) : bytes_(b) {}
  std::uint64_t get(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) throw FormatError("model file is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  double get_double() {
    const std::uint64_t bits = get(8);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  std::string get_string(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("model file is truncated");
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* source_name(SwitchSource s) {
  switch (s) {
    case SwitchSource::None: return "none";
    case SwitchSource::User: return "user";
    case SwitchSource::Auto: return "auto";
  }
  return "?";
}

std::string format_record(const SessionLogRecord& r) {
  std::string out;
  out.reserve(1024);
  const auto& s = r.sample;
  out += "t=" + std::to_string(s.step);
  out += " time=";
  append_hex(out, s.time_s);
  out += " emg=";
  append_joints(out, s.emg_raw);
  out += " pos=";
  append_joints(out, s.joint_pos);
  out += " vel=";
  append_joints(out, s.joint_vel);
  out += " pulse=" + std::to_string(s.switch_pulse);
  out += " joint=" + std::to_string(s.active_joint);
  out += " mav=";
  append_joints(out, r.processed.emg_mav);
  out += " drive=";
  append_hex(out, r.processed.ch_drive);
  out += " sw=";
  append_hex(out, r.processed.ch_switch);
  out += " pred=";
  if (r.predictions.empty()) out += '-';
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    if (i) out += ',';
    append_hex(out, r.predictions[i].raw);
    out += ':';
    append_hex(out, r.predictions[i].normalized);
  }
  out += " mat=";
  if (r.matured.empty()) out += '-';
  for (std::size_t i = 0; i < r.matured.size(); ++i) {
    if (i) out += ';';
    const auto& m = r.matured[i];
    out += std::to_string(m.question) + ':' + std::to_string(m.matured.step) + ':';
    append_hex(out, m.matured.truncated_return);
    out += ':';
    append_hex(out, m.matured.prediction);
  }
  out += " alarm=";
  out += r.advisor.timing_alarm ? '1' : '0';
  out += " rank=";
  for (int i = 0; i < kNumJoints; ++i) {
    if (i) out += ',';
    out += std::to_string(r.advisor.ranking[i]);
  }
  out += " sugg=" + std::to_string(r.advisor.suggested_joint);
  out += std::string(" act=") + action_name(r.advisor.action);
  out += " lead=" + (r.advisor.lead_candidate_tick ? std::to_string(*r.advisor.lead_candidate_tick) : std::string("-"));
  out += std::string(" auto=") + autonomy_name(r.autonomy);
  out += std::string(" src=") + source_name(r.source);
  out += " to=" + (r.switched_to ? std::to_string(*r.switched_to) : std::string("-"));
  out += " cfg=" + hash_hex(r.config_hash);
  return out;
}

SessionLogRecord parse_record(const std::string& line, std::size_t num_questions) {
  const auto tokens = split(line, ' ');
  if (tokens.size() != kNumRecordKeys) {
    throw FormatError("expected " + std::to_string(kNumRecordKeys) + " fields, found " + std::to_string(tokens.size()));
  }
  std::vector<std::string> v(kNumRecordKeys);
  for (std::size_t i = 0; i < kNumRecordKeys; ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos || tokens[i].compare(0, eq, kRecordKeys[i]) != 0 ||
        eq != std::strlen(kRecordKeys[i])) {
      throw FormatError(std::string("expected field '") + kRecordKeys[i] + "', found '" + tokens[i] + "'");
    }
    v[i] = tokens[i].substr(eq + 1);
  }
  SessionLogRecord r;
  auto& s = r.sample;
  s.step = parse_int(v[0], "t");
  s.time_s = parse_double(v[1], "time");
  s.emg_raw = parse_joints(v[2], "emg");
  s.joint_pos = parse_joints(v[3], "pos");
  s.joint_vel = parse_joints(v[4], "vel");
  s.switch_pulse = static_cast<int>(parse_int(v[5], "pulse"));
  if (s.switch_pulse != 0 && s.switch_pulse != 1) throw FormatError("pulse must be 0 or 1");
  s.active_joint = parse_joint(v[6], "joint");
  r.processed.emg_mav = parse_joints(v[7], "mav");
  r.processed.ch_drive = parse_double(v[8], "drive");
  r.processed.ch_switch = parse_double(v[9], "sw");
  if (v[10] != "-") {
    for (const auto& item : split(v[10], ',')) {
      const auto pair = split(item, ':');
      if (pair.size() != 2) throw FormatError("bad prediction entry '" + item + "'");
      r.predictions.push_back({parse_double(pair[0], "pred"), parse_double(pair[1], "pred")});
    }
  }
  if (r.predictions.size() != num_questions) {
    throw FormatError("expected " + std::to_string(num_questions) + " predictions, found " +
                      std::to_string(r.predictions.size()));
  }
  if (v[11] != "-") {
    for (const auto& item : split(v[11], ';')) {
      const auto parts = split(item, ':');
      if (parts.size() != 4) throw FormatError("bad matured entry '" + item + "'");
      MaturedEntry m;
      const auto q = parse_int(parts[0], "mat");
      if (q < 0 || static_cast<std::size_t>(q) >= num_questions) throw FormatError("matured question index out of range");
      m.question = static_cast<int>(q);
      m.matured.step = parse_int(parts[1], "mat");
      m.matured.truncated_return = parse_double(parts[2], "mat");
      m.matured.prediction = parse_double(parts[3], "mat");
      r.matured.push_back(m);
    }
  }
  if (v[12] != "0" && v[12] != "1") throw FormatError("alarm must be 0 or 1");
  r.advisor.timing_alarm = v[12] == "1";
  const auto rank = split(v[13], ',');
  if (rank.size() != kNumJoints) throw FormatError("rank needs 4 joints");
  for (int i = 0; i < kNumJoints; ++i) r.advisor.ranking[i] = parse_joint(rank[i], "rank");
  r.advisor.suggested_joint = parse_joint(v[14], "sugg");
  r.advisor.action = parse_action(v[15]);
  if (v[16] != "-") r.advisor.lead_candidate_tick = parse_int(v[16], "lead");
  try {
    r.autonomy = parse_autonomy(v[17]);
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  r.source = parse_source(v[18]);
  if (v[19] != "-") r.switched_to = parse_joint(v[19], "to");
  r.config_hash = parse_hash(v[20]);
  return r;
}

SessionLogWriter::SessionLogWriter(const std::string& path, const SessionLogHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw FormatError("cannot open log for writing: " + path);
  if (header.config_json.find('\n') != std::string::npos) throw FormatError("config json must be a single line");
  out_ << "#gvfswitch-log version=" << header.version << '\n';
  out_ << "#config_hash=" << hash_hex(header.config_hash) << '\n';
  out_ << "#questions=";
  for (std::size_t i = 0; i < header.question_ids.size(); ++i) out_ << (i ? "," : "") << header.question_ids[i];
  out_ << '\n';
  out_ << "#config=" << header.config_json << '\n';
  if (!out_) throw FormatError("log write failed: " + path_);
}

void SessionLogWriter::write(const SessionLogRecord& record) {
  out_ << format_record(record) << '\n';
  if (!out_) throw FormatError("log write failed: " + path_);
  ++count_;
}

void SessionLogWriter::flush() {
  out_.flush();
  if (!out_) throw FormatError("log flush failed: " + path_);
}

void SessionLogWriter::close() {
  if (out_.is_open()) {
    out_.flush();
    out_.close();
  }
}

SessionLog read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open log: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  SessionLog log;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) -> int {
    // 1 whole line, 0 end of file, -1 partial trailing line
    if (pos >= text.size()) return 0;
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      line = text.substr(pos);
      pos = text.size();
      return -1;
    }
    line = text.substr(pos, nl - pos);
    pos = nl + 1;
    return 1;
  };

  std::string line;
  auto header_line = [&](const std::string& prefix) {
    if (next_line(line) != 1 || line.rfind(prefix, 0) != 0) {
      throw FormatError("log header is missing '" + prefix + "'");
    }
    return line.substr(prefix.size());
  };
  const std::string version = header_line("#gvfswitch-log version=");
  if (version != std::to_string(kLogFormatVersion)) {
    throw FormatError("unsupported log format version " + version + " (expected " +
                      std::to_string(kLogFormatVersion) + ")");
  }
  log.header.version = kLogFormatVersion;
  const std::string hash = header_line("#config_hash=");
  if (hash.empty()) throw FormatError("log header has no config hash");
  log.header.config_hash = parse_hash(hash);
  const std::string ids = header_line("#questions=");
  if (!ids.empty()) log.header.question_ids = split(ids, ',');
  log.header.config_json = header_line("#config=");

  std::int64_t expected = 0;
  while (true) {
    const int status = next_line(line);
    if (status == 0) break;
    if (status == -1) {
      log.truncation = "log truncated after tick " + std::to_string(expected - 1) + " (partial record discarded)";
      break;
    }
    SessionLogRecord r;
    try {
      r = parse_record(line, log.header.question_ids.size());
    } catch (const FormatError& e) {
      throw FormatError("malformed record at tick " + std::to_string(expected) + ": " + e.what());
    }
    if (r.sample.step != expected) {
      throw FormatError("non-contiguous tick " + std::to_string(r.sample.step) + " (expected " +
                        std::to_string(expected) + ")");
    }
    if (r.config_hash != log.header.config_hash) {
      throw FormatError("record at tick " + std::to_string(expected) + " carries a different config hash");
    }
    log.records.push_back(std::move(r));
    ++expected;
  }
  return log;
}

void write_log(const std::string& path, const SessionLog& log) {
  SessionLogWriter w(path, log.header);
  for (const auto& r : log.records) w.write(r);
  w.close();
}

std::vector<unsigned char> serialize_model(const ModelFile& model) {
  std::vector<unsigned char> out;
  out.insert(out.end(), {'G', 'V', 'F', 'S'});
  put_le(out, kModelFormatVersion, 4);
  put_le(out, model.config_hash, 8);
  put_le(out, model.questions.size(), 4);
  for (const auto& q : model.questions) {
    put_le(out, q.id.size(), 4);
    out.insert(out.end(), q.id.begin(), q.id.end());
    put_le(out, static_cast<std::uint32_t>(q.timescale), 4);
    std::uint64_t bits;
    std::memcpy(&bits, &q.gamma, sizeof bits);
    put_le(out, bits, 8);
    put_le(out, q.weights.size(), 8);
    out.reserve(out.size() + q.weights.size() * 8);
    for (double w : q.weights) {
      std::memcpy(&bits, &w, sizeof bits);
      put_le(out, bits, 8);
    }
  }
  return out;
}

ModelFile deserialize_model(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "GVFS", 4) != 0) throw FormatError("not a model file (bad magic)");
  ByteReader r(bytes);
  r.get(4);
  const auto version = r.get(4);
  if (version != kModelFormatVersion) throw FormatError("unsupported model format version " + std::to_string(version));
  ModelFile m;
  m.config_hash = r.get(8);
  const auto count = r.get(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    ModelQuestion q;
    q.id = r.get_string(r.get(4));
    q.timescale = static_cast<int>(r.get(4));
    q.gamma = r.get_double();
    const auto n = r.get(8);
    if (n > bytes.size() / 8) throw FormatError("model weight count exceeds file size");
    q.weights.resize(n);
    for (auto& w : q.weights) w = r.get_double();
    m.questions.push_back(std::move(q));
  }
  if (!r.done()) throw FormatError("trailing bytes after model data");
  return m;
}

void save_model(const std::string& path, const ModelFile& model) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open model for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("model write failed: " + path);
}

ModelFile load_model(const std::string& path, std::optional<std::uint64_t> expected_hash, bool allow_mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ModelFile m = deserialize_model(bytes);
  if (expected_hash && *expected_hash != m.config_hash && !allow_mismatch) {
    throw ConfigError("model config hash " + hash_hex(m.config_hash) + " does not match " +
                      hash_hex(*expected_hash));
  }
  return m;
}

}  // namespace gvfswitch
