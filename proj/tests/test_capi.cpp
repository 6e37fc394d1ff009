#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "crowdsac/c_api.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("crowdsac_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Config {
  cs_config* ptr = nullptr;
  Config() { REQUIRE(cs_config_load(nullptr, &ptr) == CS_OK); }
  ~Config() { cs_config_free(ptr); }
  void set(const char* key, const std::string& value) { REQUIRE(cs_config_set(ptr, key, value.c_str()) == CS_OK); }
};

// Trains zero episodes and returns the checkpoint path.
fs::path fresh_checkpoint(Config& c, const fs::path& dir) {
  c.set("run.out", dir.string());
  c.set("run.episodes", "0");
  REQUIRE(cs_train(c.ptr) == CS_OK);
  return dir / "final.ckpt";
}

}  // namespace

TEST_SUITE("c api") {
  TEST_CASE("status names") {
    CHECK(std::string(cs_status_name(CS_OK)) == "ok");
    CHECK(std::string(cs_status_name(CS_ERR_CONFIG)) != std::string(cs_status_name(CS_ERR_PARSE)));
  }

  TEST_CASE("config set, dump and errors") {
    Config c;
    c.set("sim.n_obstacles", "3");
    size_t needed = 0;
    CHECK(cs_config_dump(c.ptr, nullptr, 0, &needed) == CS_OK);
    REQUIRE(needed > 1);
    std::vector<char> buf(needed);
    CHECK(cs_config_dump(c.ptr, buf.data(), buf.size(), &needed) == CS_OK);
    CHECK(std::strlen(buf.data()) + 1 == needed);
    CHECK(std::string(buf.data()).find("n_obstacles = 3") != std::string::npos);

    CHECK(cs_config_set(c.ptr, "sim.bogus", "1") == CS_ERR_CONFIG);
    CHECK(std::string(cs_last_error()).find("sim.bogus") != std::string::npos);
    CHECK(cs_config_set(c.ptr, "dsac.gamma", "2") == CS_ERR_CONFIG);
    // A rejected value leaves the config untouched.
    CHECK(cs_config_dump(c.ptr, buf.data(), buf.size(), &needed) == CS_OK);
    CHECK(std::string(buf.data()).find("gamma = 0.95") != std::string::npos);
    CHECK(cs_config_set(nullptr, "a.b", "1") == CS_ERR_USAGE);

    cs_config* missing = nullptr;
    CHECK(cs_config_load("/nonexistent/run.ini", &missing) == CS_ERR_CONFIG);
    CHECK(missing == nullptr);
  }

  TEST_CASE("config file load") {
    const auto dir = scratch("load");
    {
      std::ofstream out(dir / "run.ini");
      out << "[encoder]\nvariant = AW\n[run]\nepisodes = 4\n";
    }
    cs_config* c = nullptr;
    REQUIRE(cs_config_load((dir / "run.ini").string().c_str(), &c) == CS_OK);
    size_t needed = 0;
    cs_config_dump(c, nullptr, 0, &needed);
    std::vector<char> buf(needed);
    cs_config_dump(c, buf.data(), buf.size(), &needed);
    CHECK(std::string(buf.data()).find("variant = AW") != std::string::npos);
    cs_config_free(c);
  }

  TEST_CASE("train, load an agent, act and read the policy") {
    const auto dir = scratch("agent");
    Config c;
    c.set("sim.n_obstacles", "2");
    const auto ckpt = fresh_checkpoint(c, dir);
    cs_agent* agent = nullptr;
    REQUIRE(cs_agent_load(c.ptr, ckpt.string().c_str(), &agent) == CS_OK);
    const double robot[9] = {0, -4, 0, 0, 0.3, 0, 4, 1, M_PI / 2};
    const double obstacles[10] = {1, 0, -0.5, 0, 0.3, -1, 1, 0.5, 0, 0.3};
    std::vector<double> probs(81);
    REQUIRE(cs_agent_policy(agent, robot, obstacles, 2, probs.data(), probs.size()) == CS_OK);
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    int action = -1;
    REQUIRE(cs_agent_act(agent, robot, obstacles, 2, 1, 0, &action) == CS_OK);
    CHECK(action == static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
    int a1 = -1, a2 = -1;
    cs_agent_act(agent, robot, obstacles, 2, 0, 77, &a1);
    cs_agent_act(agent, robot, obstacles, 2, 0, 77, &a2);
    CHECK(a1 == a2);
    CHECK(a1 >= 0);
    CHECK(a1 < 81);
    CHECK(cs_agent_policy(agent, robot, obstacles, 2, probs.data(), 10) == CS_ERR_USAGE);
    CHECK(cs_agent_act(agent, nullptr, obstacles, 2, 1, 0, &action) == CS_ERR_USAGE);
    cs_agent_free(agent);
  }

  TEST_CASE("eval summary and mismatch") {
    const auto dir = scratch("eval");
    Config c;
    const auto ckpt = fresh_checkpoint(c, dir);
    cs_eval_summary s{}, t{};
    REQUIRE(cs_eval(c.ptr, ckpt.string().c_str(), 2, 1, nullptr, &s, &t) == CS_OK);
    CHECK(s.episodes == 2);
    CHECK(t.episodes == 2);
    CHECK(s.success_rate + s.collision_rate + s.timeout_rate == doctest::Approx(1.0));

    Config other;
    other.set("encoder.variant", "AW");
    CHECK(cs_eval(other.ptr, ckpt.string().c_str(), 2, 0, nullptr, &s, nullptr) == CS_ERR_CONFIG);
    const std::string msg = cs_last_error();
    CHECK(msg.find("LSA") != std::string::npos);
    CHECK(msg.find("AW") != std::string::npos);
    CHECK(cs_eval(c.ptr, (dir / "nope.ckpt").string().c_str(), 2, 0, nullptr, &s, nullptr) != CS_OK);
  }

  TEST_CASE("inspect on RG is refused") {
    const auto dir = scratch("rg");
    Config c;
    c.set("encoder.variant", "RG");
    const auto ckpt = fresh_checkpoint(c, dir);
    CHECK(cs_inspect(c.ptr, ckpt.string().c_str(), 1, (dir / "out").string().c_str()) == CS_ERR_CONFIG);
    CHECK(std::string(cs_last_error()) == "encoder has no attention scores");
  }

  TEST_CASE("render maps parse failures") {
    const auto dir = scratch("render");
    {
      std::ofstream out(dir / "bad.csv");
      out << "episode,step,agent_id,x,y,vx,vy\n0,0,0,1,2,3\n";
    }
    CHECK(cs_render((dir / "bad.csv").string().c_str(), (dir / "bad.svg").string().c_str()) == CS_ERR_PARSE);
    CHECK(std::string(cs_last_error()).find("line 2") != std::string::npos);
    {
      std::ofstream out(dir / "empty.csv");
      out << "episode,step,agent_id,x,y,vx,vy\n";
    }
    CHECK(cs_render((dir / "empty.csv").string().c_str(), (dir / "empty.svg").string().c_str()) == CS_OK);
    CHECK(fs::exists(dir / "empty.svg"));
  }

  TEST_CASE("oracle suites") {
    CHECK(cs_oracle("reward") == CS_OK);
    CHECK(cs_oracle("nope") == CS_ERR_USAGE);
    CHECK(cs_oracle(nullptr) == CS_ERR_USAGE);
  }
}
