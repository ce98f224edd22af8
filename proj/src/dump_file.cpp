#include "flashpuf/dump_file.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "flashpuf/errors.hpp"

namespace flashpuf::dump {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'P', 'U', 'F'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  const auto raw = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(raw >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string("dump truncated while reading ") + what);
    }
    auto part = in_.subspan(pos_, n);
    pos_ += n;
    return part;
  }

  template <typename T>
  T get(const char* what) {
    auto raw = take(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
    return static_cast<T>(v);
  }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

DumpHeader read_header_fields(Reader& r) {
  auto magic = r.take(kMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw FormatError("not an FPUF dump (bad magic)");
  }
  DumpHeader h;
  h.version = r.get<std::uint16_t>("version");
  if (h.version != kFormatVersion) {
    throw FormatError("unsupported FPUF version " + std::to_string(h.version));
  }
  h.geometry.pages_per_block = r.get<std::uint32_t>("pages_per_block");
  h.geometry.bytes_per_page = r.get<std::uint32_t>("bytes_per_page");
  h.geometry.blocks_per_device = r.get<std::uint32_t>("blocks_per_device");
  try {
    h.geometry.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("dump header has invalid geometry: ") + e.what());
  }
  h.block = r.get<std::uint32_t>("block");
  h.device_seed = r.get<std::uint64_t>("device_seed");
  h.condition.centi_celsius = r.get<std::int32_t>("temperature");
  h.condition.millivolts = r.get<std::uint32_t>("voltage");
  h.condition.regulator = r.get<std::uint8_t>("regulator flag");
  h.trial_count = r.get<std::uint32_t>("trial count");
  if (r.remaining() / sizeof(std::uint64_t) < h.trial_count) {
    throw FormatError("dump truncated while reading halt cycles");
  }
  h.halt_cycles.resize(h.trial_count);
  for (auto& c : h.halt_cycles) c = r.get<std::uint64_t>("halt cycles");
  return h;
}

}  // namespace

std::size_t DumpHeader::payload_bytes() const noexcept {
  return static_cast<std::size_t>(trial_count) * (geometry.pages_per_block / 2) *
         geometry.bytes_per_page;
}

std::vector<std::uint8_t> encode(const ResponseSet& set) {
  set.check_complete();
  const auto& g = set.geometry;
  constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
  if (g.pages_per_block > u32max || g.bytes_per_page > u32max || g.blocks_per_device > u32max ||
      set.block > u32max || set.trials_per_condition > u32max) {
    throw SizeError("response set dimensions exceed the dump format");
  }
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.pages_per_block));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.bytes_per_page));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.blocks_per_device));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.block));
  put_le<std::uint64_t>(out, set.device_seed);
  const auto fixed = to_fixed_point(set.condition);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(fixed.centi_celsius));
  put_le<std::uint32_t>(out, fixed.millivolts);
  put_le<std::uint8_t>(out, fixed.regulator);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.trials_per_condition));
  for (std::size_t t = 0; t < set.trials_per_condition; ++t) {
    put_le<std::uint64_t>(out, set.halt_cycle(t));
  }
  for (std::size_t t = 0; t < set.trials_per_condition; ++t) {
    for (std::size_t page : victim_pages(g)) {
      const auto& payload = set.at(t, page).payload;
      out.insert(out.end(), payload.begin(), payload.end());
    }
  }
  return out;
}

DumpHeader decode_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  return read_header_fields(r);
}

ResponseSet decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const DumpHeader h = read_header_fields(r);
  if (r.remaining() != h.payload_bytes()) {
    throw FormatError("dump payload holds " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(h.payload_bytes()));
  }
  ResponseSet set;
  set.device_seed = h.device_seed;
  set.block = h.block;
  set.condition = from_fixed_point(h.condition);
  set.geometry = h.geometry;
  set.trials_per_condition = h.trial_count;
  for (std::size_t t = 0; t < h.trial_count; ++t) {
    for (std::size_t page : victim_pages(h.geometry)) {
      auto payload = r.take(h.geometry.bytes_per_page, "payload");
      set.responses.push_back({h.device_seed, h.block, page, t, set.condition, h.halt_cycles[t],
                               {payload.begin(), payload.end()}});
    }
  }
  return set;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_file(const std::filesystem::path& path, const ResponseSet& set) {
  write_bytes(path, encode(set));
}

ResponseSet read_file(const std::filesystem::path& path) {
  try {
    return decode(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

DumpHeader read_header(const std::filesystem::path& path) {
  try {
    return decode_header(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace flashpuf::dump
