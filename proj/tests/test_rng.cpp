#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "spoofbreak/rng.hpp"

using spoofbreak::Rng;
using spoofbreak::fnv1a64;

TEST_CASE("same seed, same stream; different seed, different stream") {
  Rng a(7), b(7), c(8);
  bool diverged = false;
  for (int i = 0; i < 64; ++i) {
    const uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    if (va != c.next_u64()) diverged = true;
  }
  CHECK(diverged);
}

TEST_CASE("save/restore replays the exact sequence") {
  Rng rng(123);
  for (int i = 0; i < 10; ++i) rng.next_u64();
  const auto snap = rng.save_state();
  std::vector<uint64_t> first;
  for (int i = 0; i < 20; ++i) first.push_back(rng.next_u64());
  rng.restore_state(snap);
  for (int i = 0; i < 20; ++i) CHECK(rng.next_u64() == first[static_cast<size_t>(i)]);
}

TEST_CASE("uniform stays in range and fills it") {
  Rng rng(9);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-3.0, 5.0);
    CHECK(v >= -3.0);
    CHECK(v < 5.0);
  }
}

TEST_CASE("next_below covers all residues without bias artifacts") {
  Rng rng(11);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[static_cast<size_t>(rng.next_below(7))];
  for (int c : counts) CHECK(c > 700);  // each residue near 1000
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng(13);
  double sum = 0, sumsq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation and is seed-stable") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<size_t>(i)] = i;
  std::vector<int> w = v;
  Rng a(99), b(99);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}

TEST_CASE("fork yields a decorrelated child stream") {
  Rng parent(5);
  Rng child = parent.fork(1);
  std::set<uint64_t> seen;
  for (int i = 0; i < 32; ++i) seen.insert(parent.next_u64());
  int collisions = 0;
  for (int i = 0; i < 32; ++i) collisions += seen.count(child.next_u64()) ? 1 : 0;
  CHECK(collisions == 0);
}

TEST_CASE("fnv1a64 matches published reference digests") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
