#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "gvfswitch/engine.hpp"
#include "gvfswitch/offline.hpp"

using namespace gvfswitch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gvfswitch_test_session_io";
  fs::create_directories(dir);
  return dir / name;
}

const SessionLog& short_log() {
  static const SessionLog log = simulate_session(EngineConfig{}, 1200);
  return log;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("log round trip is exact") {
  const auto& log = short_log();
  REQUIRE(log.records.size() == 1200);
  const auto path = scratch("roundtrip.log");
  write_log(path.string(), log);
  const SessionLog back = read_log(path.string());
  CHECK_FALSE(back.truncation);
  CHECK(back.header == log.header);
  REQUIRE(back.records.size() == log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) REQUIRE(back.records[i] == log.records[i]);
  // second write is byte-identical
  const auto again = scratch("roundtrip2.log");
  write_log(again.string(), back);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("record text keeps awkward doubles") {
  SessionLogRecord r = short_log().records[100];
  r.processed.ch_drive = 0.1 + 0.2;
  r.sample.joint_pos[2] = std::nextafter(1.0, 0.0);
  r.predictions[0].raw = -0.0;
  r.predictions[1].raw = 4.9e-324;
  const auto back = parse_record(format_record(r), r.predictions.size());
  CHECK(back == r);
  CHECK(std::signbit(back.predictions[0].raw));
}

TEST_CASE("empty log") {
  SessionLog log;
  log.header = short_log().header;
  const auto path = scratch("empty.log");
  write_log(path.string(), log);
  const auto back = read_log(path.string());
  CHECK(back.records.empty());
  CHECK(back.header == log.header);
}

TEST_CASE("truncated log keeps whole ticks") {
  const auto path = scratch("trunc.log");
  write_log(path.string(), short_log());
  std::string text = slurp(path);
  text.resize(text.size() - 40);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
  const auto back = read_log(path.string());
  REQUIRE(back.truncation);
  CHECK(back.records.size() == 1199);
  CHECK(back.truncation->find("1198") != std::string::npos);
}

TEST_CASE("malformed record names the tick") {
  const auto path = scratch("bad.log");
  write_log(path.string(), short_log());
  std::string text = slurp(path);
  // corrupt the record for tick 37
  const std::string key = "\nt=37 ";
  auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  const auto field = text.find("pulse=", pos);
  text.replace(field, 7, "pulse=7");
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
  try {
    read_log(path.string());
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("tick 37") != std::string::npos);
  }
}

TEST_CASE("bad header") {
  const auto path = scratch("header.log");
  std::ofstream(path) << "#gvfswitch-log version=9\n";
  CHECK_THROWS_AS(read_log(path.string()), FormatError);
  CHECK_THROWS_AS(read_log(scratch("missing.log").string()), FormatError);
}

TEST_CASE("model round trip") {
  const TrainResult tr = train_offline(short_log(), 1);
  const auto bytes = serialize_model(tr.model);
  CHECK(std::memcmp(bytes.data(), "GVFS", 4) == 0);
  const ModelFile back = deserialize_model(bytes);
  CHECK(back == tr.model);
  CHECK(serialize_model(back) == bytes);
  const auto path = scratch("model.gvfs");
  save_model(path.string(), tr.model);
  CHECK(load_model(path.string(), tr.model.config_hash) == tr.model);

  SUBCASE("hash mismatch") {
    CHECK_THROWS_AS(load_model(path.string(), tr.model.config_hash ^ 1), ConfigError);
    CHECK_NOTHROW(load_model(path.string(), tr.model.config_hash ^ 1, true));
  }
  SUBCASE("corruption") {
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(deserialize_model(cut), FormatError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(magic), FormatError);
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_model(extra), FormatError);
  }
}

TEST_CASE("config json") {
  EngineConfig c;
  c.seed = 99;
  c.advisor.theta_on = 0.2;
  c.horde.questions.push_back(make_question("extra", "ch_switch", 30));
  const EngineConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));

  EngineConfig other = c;
  other.seed = 7;
  other.advisor.theta_on = 0.3;
  CHECK(config_hash(other) == config_hash(c));
  other.horde.defaults.lambda = 0.8;
  CHECK(config_hash(other) != config_hash(c));
  other = c;
  other.pipeline.mav_window = 5;
  CHECK(config_hash(other) != config_hash(c));

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
  CHECK(hash_hex(config_hash(c)).size() == 16);
}

TEST_CASE("shipped default config") {
  const EngineConfig c = load_config(std::string(GVFSWITCH_SOURCE_DIR) + "/configs/default.json");
  CHECK(config_to_json(c) == config_to_json(EngineConfig{}));
  CHECK(config_hash(c) == config_hash(EngineConfig{}));
}

TEST_CASE("header config reproduces its hash") {
  const auto& log = short_log();
  const EngineConfig c = config_from_log(log);
  CHECK(config_hash(c) == log.header.config_hash);
  SessionLog tampered = log;
  tampered.header.config_hash ^= 1;
  CHECK_THROWS_AS(config_from_log(tampered), FormatError);
}

TEST_CASE("offline training") {
  const auto& log = short_log();

  SUBCASE("zero cumulants leave zero weights") {
    SessionLog quiet = log;
    for (auto& r : quiet.records) {
      r.sample.emg_raw.fill(0.0);
      r.sample.joint_vel.fill(0.0);
      r.sample.switch_pulse = 0;
    }
    const auto tr = train_offline(quiet, 2);
    for (const auto& q : tr.model.questions) {
      CHECK(std::all_of(q.weights.begin(), q.weights.end(), [](double w) { return w == 0.0; }));
    }
  }
  SUBCASE("two passes equal one pass resumed") {
    const auto two = train_offline(log, 2);
    const auto one = train_offline(log, 1);
    const auto resumed = train_offline(log, 1, &one.model);
    REQUIRE(two.model.questions.size() == resumed.model.questions.size());
    for (std::size_t q = 0; q < two.model.questions.size(); ++q) {
      CHECK(same_bits(two.model.questions[q].weights, resumed.model.questions[q].weights));
    }
  }
  SUBCASE("frozen error is the replay of the final weights") {
    const auto tr = train_offline(log, 2);
    const EngineConfig c = config_from_log(log);
    Horde h = make_horde(c);
    load_model_into(h, tr.model);
    h.set_learning(false);
    const auto errs = replay_errors(h, c, log);
    for (std::size_t q = 0; q < errs.size(); ++q) {
      CHECK(errs[q].rmse == tr.passes.back().frozen[q].rmse);
      CHECK(errs[q].samples == static_cast<std::int64_t>(log.records.size()) - 44);
    }
  }
  SUBCASE("first pass online error equals the live session's") {
    // Live predictions in the log were made by the same learner on the same stream.
    const auto tr = train_offline(log, 1);
    std::vector<double> sq(log.header.question_ids.size(), 0.0);
    std::vector<std::int64_t> n(sq.size(), 0);
    for (const auto& r : log.records) {
      for (const auto& m : r.matured) {
        const double e = m.matured.prediction - m.matured.truncated_return;
        sq[m.question] += e * e;
        ++n[m.question];
      }
    }
    for (std::size_t q = 0; q < sq.size(); ++q) {
      REQUIRE(n[q] > 0);
      CHECK(tr.passes[0].online[q].rmse == doctest::Approx(std::sqrt(sq[q] / n[q])).epsilon(1e-12));
    }
  }
  SUBCASE("bad pass count") { CHECK_THROWS_AS(train_offline(log, 0), ConfigError); }
}

TEST_CASE("evaluation") {
  const auto& log = short_log();
  const auto tr = train_offline(log, 2);

  SUBCASE("on the training log it matches the final pass") {
    const auto report = evaluate(tr.model, log);
    REQUIRE(report.rmse.size() == tr.passes.back().frozen.size());
    for (std::size_t q = 0; q < report.rmse.size(); ++q) {
      CHECK(report.rmse[q].rmse <= tr.passes.back().frozen[q].rmse + 1e-9);
    }
    CHECK(report.ticks == 1200);
    CHECK(report.switch_pulses > 0);
    REQUIRE(report.anticipation_rate);
    CHECK(*report.anticipation_rate >= 0.0);
    CHECK(*report.anticipation_rate <= 1.0);
    const auto j = report_to_json(report);
    CHECK(j.contains("anticipation_rate"));
    CHECK_FALSE(report_table(report).empty());
  }
  SUBCASE("deterministic apart from timing") {
    auto a = report_to_json(evaluate(tr.model, log));
    auto b = report_to_json(evaluate(tr.model, log));
    a.erase("timing");
    b.erase("timing");
    CHECK(a == b);
  }
  SUBCASE("no switches means no anticipation figures") {
    SessionLog quiet = log;
    for (auto& r : quiet.records) r.sample.switch_pulse = 0;
    const auto report = evaluate(tr.model, quiet);
    CHECK(report.switch_pulses == 0);
    CHECK_FALSE(report.anticipation_rate);
    CHECK_FALSE(report.median_lead_ticks);
    CHECK(report_to_json(report)["anticipation_rate"].is_null());
  }
  SUBCASE("hash mismatch") {
    ModelFile other = tr.model;
    other.config_hash ^= 1;
    CHECK_THROWS_AS(evaluate(other, log), ConfigError);
    EvalOptions opt;
    opt.allow_mismatch = true;
    CHECK_NOTHROW(evaluate(other, log, opt));
  }
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS(median({}));
}
