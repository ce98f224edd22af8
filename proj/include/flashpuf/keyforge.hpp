#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

// Code-offset fuzzy extractor over a repetition code.
//
// Enrollment picks r * key_bits response bits, draws a random key, spreads
// each key bit over r positions and publishes mask = codeword XOR response
// bits. Reconstruction XORs the mask with the fresh response bits and
// majority-decodes every group of r. A SHA-256 verifier over (salt || key)
// distinguishes a recovered key from a failed reconstruction, so a wrong key
// is never returned.
namespace flashpuf::keyforge {

// Helper-data version 1: SHA-256 verifier.
inline constexpr std::uint16_t kHelperVersionSha256 = 1;

struct CodeParams {
  unsigned repetition = 9;
  unsigned key_bits = 128;

  std::size_t selected_bits() const noexcept {
    return static_cast<std::size_t>(repetition) * key_bits;
  }
  bool operator==(const CodeParams&) const = default;
};

struct HelperData {
  std::uint16_t version = kHelperVersionSha256;
  CodeParams code;
  std::vector<std::uint8_t> mask;
  std::vector<std::uint32_t> bit_selection;
  std::array<std::uint8_t, 16> salt{};
  std::array<std::uint8_t, 32> verifier{};

  // Throws ParameterError on a broken invariant.
  void validate() const;

  // "FPHD", version u16, r u16, key_bits u16, selection count u32, indices
  // u32[], mask, salt[16], verifier[32]; little-endian.
  std::vector<std::uint8_t> serialize() const;
  // Throws FormatError on malformed input.
  static HelperData parse(std::span<const std::uint8_t> bytes);

  bool operator==(const HelperData&) const = default;
};

struct DerivedKey {
  std::vector<std::uint8_t> key;

  bool operator==(const DerivedKey&) const = default;
};

struct Enrollment {
  HelperData helper;
  DerivedKey key;
};

// Response bit positions to use. With a stability map (per-bit frequency of
// reading 0), the bits closest to always-0 or always-1 win, ties by index;
// otherwise positions are evenly strided. The result is sorted ascending.
std::vector<std::uint32_t> select_bits(std::size_t response_bits, std::size_t count,
                                       std::optional<std::span<const double>> stability);

// Without rng_seed the key and salt come from the OpenSSL CSPRNG.
Enrollment enroll(std::span<const std::uint8_t> response,
                  std::optional<std::span<const double>> stability = std::nullopt,
                  CodeParams code = {}, std::optional<std::uint64_t> rng_seed = std::nullopt);

// nullopt means reconstruction failed (verifier mismatch). Malformed inputs
// throw instead.
std::optional<DerivedKey> reconstruct(std::span<const std::uint8_t> response,
                                      const HelperData& helper);

// 1 - P(group decodes)^key_bits for independent bit errors at rate p.
double expected_failure_rate(double bit_error_rate, unsigned repetition, unsigned key_bits);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

}  // namespace flashpuf::keyforge
