#pragma once

#include <cstdint>
#include <initializer_list>

namespace isogplvm {

// Named random streams. Every random draw in the library is addressed by
// (seed, stream, key...) so results do not depend on evaluation order or
// thread schedule.
enum class Stream : std::uint64_t {
  Data = 1,
  Init = 2,
  LatentNoise = 3,
  FieldNoise = 4,
  PairSubsample = 5,
  Trace = 6,
  Grid = 7,
  Sampling = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: the state is a hashed key plus a draw counter.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> key = {})
      : key_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {
    mix(static_cast<std::uint64_t>(stream));
    for (auto k : key) mix(k);
  }

  std::uint64_t next_u64() { return splitmix64(key_ + 0xd1b54a32d192ed03ULL * ++counter_); }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal();

  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

private:
  void mix(std::uint64_t v) { key_ = splitmix64(key_ ^ splitmix64(v + 0x632be59bd9b4e019ULL)); }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace isogplvm
