#include "cagnet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <type_traits>

namespace cagnet {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  put_bytes(out, &v, sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  put_bytes(out, s.data(), s.size());
}

void put_store(std::ostream& out, const ParamStore& ps) {
  put<std::uint64_t>(out, ps.size());
  for (const auto& name : ps.names()) {
    const Tensor& t = ps.at(name);
    put_string(out, name);
    const Shape& s = t.shape();
    put<std::int32_t>(out, s.n);
    put<std::int32_t>(out, s.c);
    put<std::int32_t>(out, s.h);
    put<std::int32_t>(out, s.w);
    put_bytes(out, t.data(), t.size() * sizeof(double));
  }
}

struct Reader {
  std::ifstream in;
  std::string path;

  void get_bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    check(in.gcount() == static_cast<std::streamsize>(n),
          "truncated checkpoint: " + path);
  }
  template <typename T>
  T get() {
    T v;
    get_bytes(&v, sizeof v);
    return v;
  }
  std::string get_string(std::size_t max = 1 << 20) {
    const auto n = get<std::uint64_t>();
    check(n <= max, "corrupt checkpoint (string length): " + path);
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }
  ParamStore get_store() {
    ParamStore ps;
    const auto count = get<std::uint64_t>();
    check(count <= (1u << 20), "corrupt checkpoint (store size): " + path);
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::string name = get_string();
      Shape s;
      s.n = get<std::int32_t>();
      s.c = get<std::int32_t>();
      s.h = get<std::int32_t>();
      s.w = get<std::int32_t>();
      check(s.valid() && s.numel() <= (std::size_t{1} << 32),
            "corrupt checkpoint (shape of " + name + "): " + path);
      Tensor t(s);
      get_bytes(t.data(), t.size() * sizeof(double));
      ps.create(name, std::move(t));
    }
    return ps;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    check(out.good(), "cannot write " + tmp);
    put_bytes(out, kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put_string(out, ck.config_text);
    put<std::int64_t>(out, ck.next_epoch);
    for (std::uint64_t s : ck.rng_state) put<std::uint64_t>(out, s);
    put_store(out, ck.params);
    put_store(out, ck.buffers);
    put_store(out, ck.velocity);
    check(out.good(), "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r{std::ifstream(path, std::ios::binary), path};
  check(r.in.good(), "cannot open " + path);

  char magic[8];
  r.get_bytes(magic, sizeof magic);
  check(std::memcmp(magic, kMagic, sizeof magic) == 0,
        "not a checkpoint file: " + path);
  const auto version = r.get<std::uint32_t>();
  check(version == kVersion,
        "unsupported checkpoint version " + std::to_string(version) + ": " +
            path);

  Checkpoint ck;
  ck.config_text = r.get_string();
  ck.next_epoch = r.get<std::int64_t>();
  for (auto& s : ck.rng_state) s = r.get<std::uint64_t>();
  ck.params = r.get_store();
  ck.buffers = r.get_store();
  ck.velocity = r.get_store();
  return ck;
}

}  // namespace cagnet
