#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <vector>

#include "spoofbreak/error.hpp"
#include "spoofbreak/serialize.hpp"
#include "test_util.hpp"

using namespace spoofbreak;

namespace {

io::Archive sample_archive() {
  io::Archive ar;
  ar.meta["kind"] = "test";
  ar.meta["step"] = 42;
  const float f[3] = {1.5f, -2.25f, 0.0f};
  const double d[2] = {3.141592653589793, -1e-9};
  const std::uint64_t u[4] = {1, 2, 3, 0xFFFFFFFFFFFFFFFFULL};
  ar.add_f32("weights", f, 3);
  ar.add_f64("moments", d, 2);
  ar.add_u64("rng", u, 4);
  return ar;
}

}  // namespace

TEST_CASE("archive round trips values, meta, and tensor order") {
  const std::string dir = testutil::scratch_dir("archive_roundtrip");
  io::Archive ar = sample_archive();
  ar.write(dir + "/a.sbck");

  io::Archive back = io::Archive::read(dir + "/a.sbck");
  CHECK(back.meta["kind"] == "test");
  CHECK(back.meta["step"] == 42);
  REQUIRE(back.tensors().size() == 3);
  CHECK(back.tensors()[0].name == "weights");
  CHECK(back.tensors()[1].name == "moments");
  CHECK(back.tensors()[2].name == "rng");

  auto f = back.read_f32("weights");
  REQUIRE(f.size() == 3);
  CHECK(f[0] == 1.5f);
  CHECK(f[1] == -2.25f);
  auto d = back.read_f64("moments");
  CHECK(d[0] == 3.141592653589793);
  CHECK(d[1] == -1e-9);
  auto u = back.read_u64("rng");
  CHECK(u[3] == 0xFFFFFFFFFFFFFFFFULL);

  CHECK(back.has("weights"));
  CHECK_FALSE(back.has("nope"));
  CHECK_THROWS_AS(back.tensor("nope"), LoadError);
  CHECK_THROWS_AS(back.read_f64("weights"), LoadError);  // dtype mismatch
}

TEST_CASE("identical contents produce identical bytes") {
  const std::string dir = testutil::scratch_dir("archive_determinism");
  sample_archive().write(dir + "/x.sbck");
  sample_archive().write(dir + "/y.sbck");
  CHECK(testutil::slurp(dir + "/x.sbck") == testutil::slurp(dir + "/y.sbck"));
  CHECK_FALSE(testutil::slurp(dir + "/x.sbck").empty());
}

TEST_CASE("corruption is rejected with LoadError") {
  const std::string dir = testutil::scratch_dir("archive_corrupt");
  sample_archive().write(dir + "/good.sbck");
  const std::string bytes = testutil::slurp(dir + "/good.sbck");

  auto spit = [&](const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  };

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  spit(dir + "/magic.sbck", bad_magic);
  CHECK_THROWS_AS(io::Archive::read(dir + "/magic.sbck"), LoadError);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  spit(dir + "/version.sbck", bad_version);
  CHECK_THROWS_AS(io::Archive::read(dir + "/version.sbck"), LoadError);

  spit(dir + "/trunc.sbck", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(io::Archive::read(dir + "/trunc.sbck"), LoadError);

  spit(dir + "/tiny.sbck", bytes.substr(0, 10));
  CHECK_THROWS_AS(io::Archive::read(dir + "/tiny.sbck"), LoadError);

  CHECK_THROWS_AS(io::Archive::read(dir + "/missing.sbck"), NotFound);
}

TEST_CASE("empty tensors and empty archives are legal") {
  const std::string dir = testutil::scratch_dir("archive_empty");
  io::Archive ar;
  ar.meta["kind"] = "empty";
  ar.add_f64("nothing", nullptr, 0);
  ar.write(dir + "/e.sbck");
  io::Archive back = io::Archive::read(dir + "/e.sbck");
  CHECK(back.read_f64("nothing").empty());
}
