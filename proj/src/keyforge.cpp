#include "flashpuf/keyforge.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <string>

#include "flashpuf/errors.hpp"
#include "flashpuf/flash_device.hpp"

namespace flashpuf::keyforge {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'P', 'H', 'D'};

void set_bit(std::vector<std::uint8_t>& bytes, std::size_t bit, bool value) {
  if (value) bytes[bit / 8] |= cell_mask(bit);
}

class ByteWriter {
 public:
  void put(std::span<const std::uint8_t> raw) { out_.insert(out_.end(), raw.begin(), raw.end()); }
  template <typename T>
  void put_le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
    }
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::span<const std::uint8_t> take(std::size_t n) {
    if (in_.size() - pos_ < n) throw FormatError("helper data truncated");
    auto part = in_.subspan(pos_, n);
    pos_ += n;
    return part;
  }
  template <typename T>
  T get_le() {
    auto raw = take(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
    return static_cast<T>(v);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_code(const CodeParams& code) {
  if (code.repetition % 2 == 0) throw ParameterError("repetition factor must be odd");
  if (code.repetition < 3) throw ParameterError("repetition factor must be >= 3");
  if (code.repetition > 0xFFFF) throw ParameterError("repetition factor exceeds 16 bits");
  if (code.key_bits == 0 || code.key_bits % 8 != 0 || code.key_bits > 0xFFFF) {
    throw ParameterError("key_bits must be a positive multiple of 8 below 65536");
  }
}

std::array<std::uint8_t, 32> key_verifier(const std::array<std::uint8_t, 16>& salt,
                                          std::span<const std::uint8_t> key) {
  std::vector<std::uint8_t> material(salt.begin(), salt.end());
  material.insert(material.end(), key.begin(), key.end());
  auto digest = sha256(material);
  OPENSSL_cleanse(material.data(), material.size());
  return digest;
}

}  // namespace

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1 ||
      length != digest.size()) {
    throw Error("SHA-256 computation failed");
  }
  return digest;
}

void HelperData::validate() const {
  if (version != kHelperVersionSha256) {
    throw ParameterError("unsupported helper data version " + std::to_string(version));
  }
  check_code(code);
  if (bit_selection.size() != code.selected_bits()) {
    throw ParameterError("bit selection size does not equal r * key_bits");
  }
  if (mask.size() != (code.selected_bits() + 7) / 8) {
    throw ParameterError("mask length does not match the code parameters");
  }
  std::vector<std::uint32_t> sorted = bit_selection;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ParameterError("bit selection holds duplicate indices");
  }
}

std::vector<std::uint8_t> HelperData::serialize() const {
  validate();
  ByteWriter w;
  w.put(kMagic);
  w.put_le<std::uint16_t>(version);
  w.put_le<std::uint16_t>(static_cast<std::uint16_t>(code.repetition));
  w.put_le<std::uint16_t>(static_cast<std::uint16_t>(code.key_bits));
  w.put_le<std::uint32_t>(static_cast<std::uint32_t>(bit_selection.size()));
  for (std::uint32_t index : bit_selection) w.put_le<std::uint32_t>(index);
  w.put(mask);
  w.put(salt);
  w.put(verifier);
  return w.take();
}

HelperData HelperData::parse(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw FormatError("not a helper data file (bad magic)");
  }
  HelperData h;
  h.version = r.get_le<std::uint16_t>();
  h.code.repetition = r.get_le<std::uint16_t>();
  h.code.key_bits = r.get_le<std::uint16_t>();
  const auto count = r.get_le<std::uint32_t>();
  if (count != h.code.selected_bits()) {
    throw FormatError("selection count does not equal r * key_bits");
  }
  h.bit_selection.resize(count);
  for (auto& index : h.bit_selection) index = r.get_le<std::uint32_t>();
  auto mask = r.take((static_cast<std::size_t>(count) + 7) / 8);
  h.mask.assign(mask.begin(), mask.end());
  auto salt = r.take(h.salt.size());
  std::copy(salt.begin(), salt.end(), h.salt.begin());
  auto verifier = r.take(h.verifier.size());
  std::copy(verifier.begin(), verifier.end(), h.verifier.begin());
  if (!r.done()) throw FormatError("trailing bytes after helper data");
  try {
    h.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid helper data: ") + e.what());
  }
  return h;
}

std::vector<std::uint32_t> select_bits(std::size_t response_bits, std::size_t count,
                                       std::optional<std::span<const double>> stability) {
  if (count > response_bits) {
    throw SizeError("response has " + std::to_string(response_bits) + " bits, " +
                    std::to_string(count) + " needed");
  }
  if (response_bits > 0xFFFFFFFFull) throw SizeError("response too large for 32-bit indices");
  std::vector<std::uint32_t> chosen;
  if (stability) {
    if (stability->size() != response_bits) {
      throw SizeError("stability map does not cover the response");
    }
    std::vector<std::uint32_t> order(response_bits);
    std::iota(order.begin(), order.end(), 0u);
    const auto& freq = *stability;
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return std::abs(freq[a] - 0.5) > std::abs(freq[b] - 0.5);
    });
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(chosen.begin(), chosen.end());
  } else {
    const std::size_t stride = count == 0 ? 1 : response_bits / count;
    for (std::size_t i = 0; i < count; ++i) chosen.push_back(static_cast<std::uint32_t>(i * stride));
  }
  return chosen;
}

Enrollment enroll(std::span<const std::uint8_t> response,
                  std::optional<std::span<const double>> stability, CodeParams code,
                  std::optional<std::uint64_t> rng_seed) {
  check_code(code);
  const std::size_t needed = code.selected_bits();
  const std::size_t available = response.size() * 8;
  if (available < needed) {
    throw SizeError("response has " + std::to_string(available) + " bits, enrollment needs " +
                    std::to_string(needed));
  }

  Enrollment e;
  HelperData& h = e.helper;
  h.code = code;
  h.bit_selection = select_bits(available, needed, stability);

  e.key.key.assign(code.key_bits / 8, 0);
  if (rng_seed) {
    std::mt19937_64 gen(*rng_seed);
    std::uniform_int_distribution<unsigned> byte(0, 255);
    for (auto& b : e.key.key) b = static_cast<std::uint8_t>(byte(gen));
    for (auto& b : h.salt) b = static_cast<std::uint8_t>(byte(gen));
  } else if (RAND_bytes(e.key.key.data(), static_cast<int>(e.key.key.size())) != 1 ||
             RAND_bytes(h.salt.data(), static_cast<int>(h.salt.size())) != 1) {
    throw Error("random number generation failed");
  }

  h.mask.assign((needed + 7) / 8, 0);
  for (std::size_t j = 0; j < needed; ++j) {
    const bool code_bit = cell_value(e.key.key, j / code.repetition);
    set_bit(h.mask, j, code_bit != cell_value(response, h.bit_selection[j]));
  }
  h.verifier = key_verifier(h.salt, e.key.key);
  return e;
}

std::optional<DerivedKey> reconstruct(std::span<const std::uint8_t> response,
                                      const HelperData& helper) {
  helper.validate();
  const std::size_t available = response.size() * 8;
  const auto highest = *std::max_element(helper.bit_selection.begin(), helper.bit_selection.end());
  if (highest >= available) {
    throw SizeError("response has " + std::to_string(available) +
                    " bits, helper data references bit " + std::to_string(highest));
  }
  const unsigned r = helper.code.repetition;
  DerivedKey out;
  out.key.assign(helper.code.key_bits / 8, 0);
  for (std::size_t k = 0; k < helper.code.key_bits; ++k) {
    unsigned ones = 0;
    for (std::size_t j = k * r; j < (k + 1) * r; ++j) {
      ones += cell_value(helper.mask, j) != cell_value(response, helper.bit_selection[j]);
    }
    set_bit(out.key, k, ones > r / 2);
  }
  const auto check = key_verifier(helper.salt, out.key);
  if (CRYPTO_memcmp(check.data(), helper.verifier.data(), check.size()) != 0) {
    OPENSSL_cleanse(out.key.data(), out.key.size());
    return std::nullopt;
  }
  return out;
}

double expected_failure_rate(double bit_error_rate, unsigned repetition, unsigned key_bits) {
  if (!(bit_error_rate >= 0.0 && bit_error_rate <= 0.5)) {
    throw DomainError("bit error rate must be within [0, 0.5]");
  }
  if (repetition % 2 == 0) throw DomainError("repetition factor must be odd");
  if (key_bits == 0) throw DomainError("key_bits must be positive");
  const double p = bit_error_rate;
  double group_ok = 0.0;
  for (unsigned j = 0; j <= repetition / 2; ++j) {
    const double log_binom = std::lgamma(repetition + 1.0) - std::lgamma(j + 1.0) -
                             std::lgamma(repetition - j + 1.0);
    const double term = std::exp(log_binom) * std::pow(p, j) * std::pow(1.0 - p, repetition - j);
    group_ok += term;
  }
  if (group_ok <= 0.0) return 1.0;
  return -std::expm1(static_cast<double>(key_bits) * std::log(std::min(group_ok, 1.0)));
}

}  // namespace flashpuf::keyforge
