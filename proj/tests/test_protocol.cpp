#include <thread>

#include "doctest.h"
#include "dtwin/mirror.hpp"
#include "dtwin/net.hpp"
#include "helpers.hpp"

using namespace dtwin;
using dtwin::testing::listing_definition;
using dtwin::testing::random_message;

TEST_CASE("encoded messages are single newline-terminated lines") {
  MirrorMessage m;
  m.kind = MessageKind::state_update;
  m.twin_id = "kw.edu.paaet:arduino:1.0/1";
  m.payload = {{"features", {{"temperature", 23.5}}}};
  m.timestamp_ms = 1234;
  std::string line = encode_message(m);
  CHECK(line.back() == '\n');
  CHECK(line.find('\n') == line.size() - 1);
  CHECK(line.find("state_update") != std::string::npos);
  CHECK(line.find("arduino") != std::string::npos);
  CHECK(decode_message(line) == m);
}

TEST_CASE("strings with newlines stay on one wire line") {
  MirrorMessage m;
  m.kind = MessageKind::error;
  m.payload = {{"message", "line one\nline two"}};
  std::string line = encode_message(m);
  CHECK(line.find('\n') == line.size() - 1);
  CHECK(decode_message(line) == m);
}

TEST_CASE("non-finite payloads are unserializable") {
  MirrorMessage m;
  m.kind = MessageKind::state_update;
  SUBCASE("NaN") { m.payload = {{"v", std::nan("")}}; }
  SUBCASE("infinity") { m.payload = {{"deep", {{"vals", {1.0, INFINITY}}}}}; }
  try {
    encode_message(m);
    FAIL("expected UnserializableValue");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unserializable_value);
  }
}

TEST_CASE("decode rejections") {
  SUBCASE("version 2") {
    try {
      decode_message(R"({"version":2,"kind":"ack"})");
      FAIL("expected UnsupportedVersion");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unsupported_version);
    }
  }
  SUBCASE("unknown kind") {
    try {
      decode_message(R"({"version":1,"kind":"bogus"})");
      FAIL("expected UnknownKind");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_kind);
    }
  }
  SUBCASE("malformed shapes") {
    for (const char* bad : {"", "][", "42", R"({"kind":"ack"})", R"({"version":1})",
                            R"({"version":1,"kind":"ack","payload":3})",
                            R"({"version":1,"kind":"ack","twin_id":7})",
                            R"({"version":1,"kind":"ack","timestamp":"x"})"}) {
      try {
        decode_message(bad);
        FAIL("expected MalformedMessage for: " << bad);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_message);
      }
    }
  }
}

TEST_CASE("round-trip property over generated messages") {
  Rng rng(808);
  for (int i = 0; i < 2000; ++i) {
    MirrorMessage m = random_message(rng);
    CHECK(decode_message(encode_message(m)) == m);
  }
}

TEST_CASE("decode survives byte fuzz") {
  Rng rng(1337);
  int decoded = 0, rejected = 0;
  for (int i = 0; i < 20000; ++i) {
    std::string line;
    if (rng.index(2) == 0) {
      size_t len = rng.index(120);
      for (size_t k = 0; k < len; ++k) line += static_cast<char>(rng.index(256));
    } else {
      line = encode_message(random_message(rng));
      size_t flips = 1 + rng.index(6);
      for (size_t f = 0; f < flips && !line.empty(); ++f) {
        line[rng.index(line.size())] = static_cast<char>(rng.index(256));
      }
    }
    try {
      decode_message(line);
      ++decoded;
    } catch (const Error&) {
      ++rejected;
    }
  }
  CHECK(decoded + rejected == 20000);  // every input returned or threw; no crash
  CHECK(rejected > 0);
}

// ---------------------------------------------------------------------------
// mirror endpoint over loopback

namespace {

struct CollectingSink : MirrorSink {
  std::mutex m;
  std::vector<TwinSnapshot> snapshots;
  std::vector<std::map<std::string, double>> flows;
  std::vector<std::string> released;

  void on_sensor_update(const TwinSnapshot& snap, const std::vector<StateChangeEvent>&,
                        int64_t) override {
    std::lock_guard lk(m);
    snapshots.push_back(snap);
  }
  void on_flow_summary(const std::string&, const std::map<std::string, double>& features,
                       int64_t, int64_t) override {
    std::lock_guard lk(m);
    flows.push_back(features);
  }
  void on_release(const std::string& twin) override {
    std::lock_guard lk(m);
    released.push_back(twin);
  }
};

MirrorMessage update_message(const std::string& twin_id, double temperature) {
  MirrorMessage m;
  m.kind = MessageKind::state_update;
  m.twin_id = twin_id;
  m.payload = {{"features", {{"temperature", temperature}}}};
  m.timestamp_ms = now_ms();
  return m;
}

}  // namespace

TEST_CASE("mirror endpoint applies updates and acks") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());
  CollectingSink sink;
  MirrorServer server(reg, 0, &sink);
  server.start();

  TcpLineClient client;
  client.connect("127.0.0.1", server.port());

  SUBCASE("state update increments the revision and returns an ack") {
    MirrorMessage reply = client.request(update_message(id, 23.5));
    CHECK(reply.kind == MessageKind::ack);
    CHECK(reply.payload["revision"] == 1);
    CHECK(reg.get_twin(id).feature_values.at("temperature").value == doctest::Approx(23.5));
  }
  SUBCASE("garbage leaves the connection usable") {
    client.send("this is not a message\n");
    auto line = client.read_line();
    REQUIRE(line);
    MirrorMessage err = decode_message(*line);
    CHECK(err.kind == MessageKind::error);
    MirrorMessage reply = client.request(update_message(id, 1.0));
    CHECK(reply.kind == MessageKind::ack);
  }
  SUBCASE("unknown twin and unknown feature are refused") {
    MirrorMessage reply = client.request(update_message("missing:twin/1", 1.0));
    CHECK(reply.kind == MessageKind::error);
    CHECK(reply.payload["code"] == errc_name(Errc::unknown_twin));

    MirrorMessage bad = update_message(id, 1.0);
    bad.payload = {{"features", {{"airquality", 0.4}}}};
    reply = client.request(bad);
    CHECK(reply.kind == MessageKind::error);
    CHECK(reply.payload["code"] == errc_name(Errc::unknown_feature));
    CHECK(reg.get_twin(id).revision == 0);
  }
  SUBCASE("probe with no features reads the snapshot without applying") {
    client.request(update_message(id, 9.0));
    MirrorMessage probe;
    probe.kind = MessageKind::state_update;
    probe.twin_id = id;
    MirrorMessage reply = client.request(probe);
    CHECK(reply.kind == MessageKind::ack);
    CHECK(reply.payload["revision"] == 1);
    CHECK(reply.payload["values"]["temperature"] == doctest::Approx(9.0));
    CHECK(reply.payload["quarantined"] == false);
    CHECK(reg.get_twin(id).revision == 1);
  }
  SUBCASE("flow summaries reach the sink") {
    MirrorMessage flow;
    flow.kind = MessageKind::flow_summary;
    flow.twin_id = id;
    flow.payload = {{"features", {{"flow_duration", 12.0}, {"syn_flag_cnt", 3.0}}},
                    {"window_s", 10.0}};
    MirrorMessage reply = client.request(flow);
    CHECK(reply.kind == MessageKind::ack);
    std::lock_guard lk(sink.m);
    REQUIRE(sink.flows.size() == 1);
    CHECK(sink.flows[0].at("syn_flag_cnt") == doctest::Approx(3.0));
  }
  SUBCASE("classifier traffic does not belong on the mirror port") {
    MirrorMessage req;
    req.kind = MessageKind::classify_request;
    req.twin_id = id;
    MirrorMessage reply = client.request(req);
    CHECK(reply.kind == MessageKind::error);
  }
  SUBCASE("quarantined twins refuse state changes until released") {
    reg.set_quarantined(id, true);
    MirrorMessage reply = client.request(update_message(id, 2.0));
    CHECK(reply.kind == MessageKind::error);
    CHECK(reply.payload["code"] == errc_name(Errc::quarantined_twin));

    MirrorMessage release;
    release.kind = MessageKind::action;
    release.twin_id = id;
    release.payload = {{"action", "release"}};
    reply = client.request(release);
    CHECK(reply.kind == MessageKind::ack);
    CHECK_FALSE(reg.quarantined(id));
    {
      std::lock_guard lk(sink.m);
      CHECK(sink.released == std::vector<std::string>{id});
    }
    reply = client.request(update_message(id, 2.0));
    CHECK(reply.kind == MessageKind::ack);
  }
  SUBCASE("inbound quarantine commands are not accepted") {
    MirrorMessage rogue;
    rogue.kind = MessageKind::action;
    rogue.twin_id = id;
    rogue.payload = {{"action", "quarantine"}};
    MirrorMessage reply = client.request(rogue);
    CHECK(reply.kind == MessageKind::error);
    CHECK_FALSE(reg.quarantined(id));
  }

  server.stop();
}

TEST_CASE("two clients update two twins concurrently") {
  TwinRegistry reg;
  std::string a = reg.create_twin(listing_definition("1"));
  std::string b = reg.create_twin(listing_definition("2"));
  MirrorServer server(reg, 0, nullptr);
  server.start();

  auto worker = [&](const std::string& id, int count) {
    TcpLineClient client;
    client.connect("127.0.0.1", server.port());
    for (int i = 1; i <= count; ++i) {
      MirrorMessage reply = client.request(update_message(id, static_cast<double>(i)));
      REQUIRE(reply.kind == MessageKind::ack);
      CHECK(reply.payload["revision"] == i);
    }
  };
  std::thread ta(worker, a, 50);
  std::thread tb(worker, b, 50);
  ta.join();
  tb.join();
  CHECK(reg.get_twin(a).revision == 50);
  CHECK(reg.get_twin(b).revision == 50);
  server.stop();
}

TEST_CASE("pipelined messages on one connection apply in order") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());
  MirrorServer server(reg, 0, nullptr);
  server.start();

  TcpLineClient client;
  client.connect("127.0.0.1", server.port());
  std::string burst;
  for (int i = 1; i <= 50; ++i) burst += encode_message(update_message(id, i));
  client.send(burst);
  for (int i = 1; i <= 50; ++i) {
    auto line = client.read_line();
    REQUIRE(line);
    MirrorMessage reply = decode_message(*line);
    CHECK(reply.payload["revision"] == i);  // acks echo revisions in order
  }
  CHECK(reg.get_twin(id).feature_values.at("temperature").value == doctest::Approx(50.0));
  server.stop();
}

TEST_CASE("actions are delivered to the twin's device connection") {
  TwinRegistry reg;
  std::string id = reg.create_twin(listing_definition());
  MirrorServer server(reg, 0, nullptr);
  server.start();

  SUBCASE("no device connection yet") {
    try {
      server.send_action({id, ActionKind::quarantine, "test"});
      FAIL("expected DeviceUnreachable");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::device_unreachable);
    }
  }

  SUBCASE("registered device receives the action and its ack is recorded") {
    TcpLineClient device;
    device.connect("127.0.0.1", server.port());
    CHECK(device.request(update_message(id, 1.0)).kind == MessageKind::ack);

    server.send_action({id, ActionKind::quarantine, "verdict"});
    auto line = device.read_line();
    REQUIRE(line);
    MirrorMessage action = decode_message(*line);
    CHECK(action.kind == MessageKind::action);
    CHECK(action.payload["action"] == "quarantine");
    CHECK(action.payload["reason"] == "verdict");

    MirrorMessage ack;
    ack.kind = MessageKind::ack;
    ack.twin_id = id;
    ack.payload = {{"action", "quarantine"}, {"status", "applied"}};
    device.send(encode_message(ack));
    for (int i = 0; i < 100 && server.action_acks(id) == 0; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    CHECK(server.action_acks(id) == 1);
    CHECK(server.actions_sent() == 1);

    SUBCASE("a closed device connection is unreachable again") {
      device.close();
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      CHECK_THROWS_AS(server.send_action({id, ActionKind::shutdown, "x"}), Error);
    }
  }
  server.stop();
}
