#include <doctest.h>

#include <cmath>
#include <limits>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"

using namespace geolens;

TEST_SUITE("common") {
  TEST_CASE("sha256 matches the published vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("base64 round trips arbitrary bytes") {
    std::string bytes;
    for (int i = 0; i < 256; ++i) bytes.push_back(static_cast<char>(i));
    for (std::size_t len : {0u, 1u, 2u, 3u, 4u, 255u, 256u}) {
      const auto s = bytes.substr(0, len);
      CHECK(base64_decode(base64_encode(s)) == s);
    }
    CHECK(base64_encode("hi") == "aGk=");
    CHECK_THROWS_AS(base64_decode("abc"), Error);
  }

  TEST_CASE("non-finite doubles travel as strings") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(jsonio::encode(inf) == "Infinity");
    CHECK(jsonio::decode_double(jsonio::encode(-inf)) == -inf);
    CHECK(std::isnan(jsonio::decode_double(jsonio::encode(std::nan("")))));
    const double x = 0.1 + 0.2;
    CHECK(jsonio::decode_double(nlohmann::json::parse(jsonio::canonical_dump(jsonio::encode(x)))) == x);
  }

  TEST_CASE("canonical dump sorts keys") {
    nlohmann::json a = {{"b", 1}, {"a", 2}};
    CHECK(jsonio::canonical_dump(a) == R"({"a":2,"b":1})");
  }

  TEST_CASE("mask encoding round trips") {
    std::vector<std::vector<bool>> m = {{true, false, true}, {false, false, true}};
    CHECK(jsonio::decode_mask(jsonio::encode_mask(m)) == m);
  }

  TEST_CASE("errors carry a code and details") {
    const Error e(ErrorCode::integrity, "broken", {{"reference", "x"}});
    const auto j = e.to_json();
    CHECK(j["error"] == "integrity_error");
    CHECK(j["details"]["reference"] == "x");
  }
}
