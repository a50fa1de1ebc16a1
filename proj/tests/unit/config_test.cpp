#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include "oocmem/config.hpp"
#include "oocmem/error.hpp"
#include "temp_dir.hpp"

using namespace oocmem;

TEST_CASE("byte sizes") {
  CHECK(parse_bytes("123") == 123);
  CHECK(parse_bytes("64K") == 64 * 1024);
  CHECK(parse_bytes("64KiB") == 64 * 1024);
  CHECK(parse_bytes("16M") == 16ull << 20);
  CHECK(parse_bytes("2G") == 2ull << 30);
  CHECK(parse_bytes("2g") == 2ull << 30);
  CHECK_THROWS_AS(parse_bytes(""), Error);
  CHECK_THROWS_AS(parse_bytes("12Q"), Error);
  CHECK_THROWS_AS(parse_bytes("-1"), Error);
  CHECK_THROWS_AS(parse_bytes("99999999999999999999"), Error);
  CHECK_THROWS_AS(parse_bytes("17179869184G"), Error);
}

TEST_CASE("defaults validate and give a tenth of RAM to prefetching") {
  ManagerConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.preemptive_budget_bytes() == (64ull << 20) / 10);
  CHECK(c.significance_level == doctest::Approx(0.01));
  CHECK_FALSE(c.overcommit);
}

TEST_CASE("validation names the offending key") {
  auto message_of = [](ManagerConfig c) -> std::string {
    try {
      c.validate();
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
      return e.what();
    }
    return "";
  };
  ManagerConfig c;
  c.ram_limit_bytes = 0;
  CHECK(message_of(c).find("ram_limit_bytes") != std::string::npos);
  c = {};
  c.preemptive_fraction = 0;
  CHECK(message_of(c).find("preemptive_fraction") != std::string::npos);
  c = {};
  c.preemptive_fraction = 1.5;
  CHECK(message_of(c).find("preemptive_fraction") != std::string::npos);
  c = {};
  c.ram_limit_bytes = 5;
  c.swap_file_size_bytes = 5;
  c.preemptive_fraction = 0.1;
  CHECK(message_of(c).find("preemptive_fraction") != std::string::npos);
  c = {};
  c.significance_level = 1.0;
  CHECK(message_of(c).find("significance_level") != std::string::npos);
  c = {};
  c.swap_file_size_bytes = c.ram_limit_bytes - 1;
  CHECK(message_of(c).find("swap_file_size_bytes") != std::string::npos);
  c = {};
  c.worker_count = 0;
  CHECK(message_of(c).find("worker_count") != std::string::npos);
}

TEST_CASE("settings parse into typed fields") {
  ManagerConfig c;
  apply_setting(c, "ram_limit_bytes", "32M");
  apply_setting(c, "preemptive_fraction", "0.25");
  apply_setting(c, "swap_policy", "fail");
  apply_setting(c, "overcommit", "on");
  apply_setting(c, "worker_count", "3");
  CHECK(c.ram_limit_bytes == 32ull << 20);
  CHECK(c.preemptive_fraction == doctest::Approx(0.25));
  CHECK(c.swap_policy == SwapPolicy::Fail);
  CHECK(c.overcommit);
  CHECK(c.worker_count == 3);
  CHECK_THROWS_AS(apply_setting(c, "bogus", "1"), Error);
  CHECK_THROWS_AS(apply_setting(c, "overcommit", "maybe"), Error);
  CHECK_THROWS_AS(apply_setting(c, "preemptive_fraction", "abc"), Error);
  CHECK_THROWS_AS(apply_setting(c, "swap_policy", "ask"), Error);
}

TEST_CASE("file then environment") {
  TempDir dir;
  auto path = dir.path() / "oocmem.conf";
  {
    std::ofstream f(path);
    f << "# comment\n\nram_limit_bytes = 8M\nswap_file_size_bytes=16M\nswap_dir=" << dir.path().string() << "\n";
  }
  auto c = load_config_file(path);
  CHECK(c.ram_limit_bytes == 8ull << 20);
  CHECK(c.swap_dir == dir.path());

  std::map<std::string, std::string> env{{"OOCMEM_RAM_LIMIT_BYTES", "4M"}, {"OOCMEM_SWAP_POLICY", "interactive"}};
  apply_env_overrides(c, [&](const char* key) -> const char* {
    auto it = env.find(key);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.ram_limit_bytes == 4ull << 20);
  CHECK(c.swap_policy == SwapPolicy::Interactive);
  CHECK(c.swap_file_size_bytes == 16ull << 20);
}

TEST_CASE("bad config files") {
  TempDir dir;
  auto path = dir.path() / "bad.conf";
  {
    std::ofstream f(path);
    f << "ram_limit_bytes 8M\n";
  }
  CHECK_THROWS_AS(load_config_file(path), Error);
  CHECK_THROWS_AS(load_config_file(dir.path() / "missing.conf"), Error);
  {
    std::ofstream f(path);
    f << "ram_limit_bytes=0\n";
  }
  CHECK_THROWS_AS(load_config(path), Error);
}
