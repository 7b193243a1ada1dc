#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace csumlab {

/// Attacker-controlled knobs of the simple checksum.
///
/// The defaults are modulo 256 over the first 15 characters of the
/// coefficient, with the coefficient padded to 24 and the exponent to 4
/// characters. `th` defaults to `m`, which admits every node.
struct ChecksumConfig {
  int m = 256;
  int precision = 15;
  int lmax_coefficient = 24;
  int lmax_exponent = 4;
  int sk = 0;
  std::optional<int> th;

  int threshold() const { return th.value_or(m); }

  /// Throws Error(InvalidArgument) when an invariant is broken.
  void validate() const;

  bool operator==(const ChecksumConfig&) const = default;
};

/// Decimal scientific notation of a double, split into the two strings the
/// checksum is computed over. Non-negative exponents carry no '+'.
struct ScientificForm {
  std::string coefficient;
  std::string exponent;

  bool operator==(const ScientificForm&) const = default;
};

ScientificForm to_scientific_form(double v);

/// Raw (un-reduced) contributions; csum is their sum mod m.
std::int64_t coefficient_sum(const std::string& coefficient, const ChecksumConfig& cfg);
std::int64_t exponent_sum(const std::string& exponent, const ChecksumConfig& cfg);

int csum(const ScientificForm& form, const ChecksumConfig& cfg);
int csum(double v, const ChecksumConfig& cfg);

/// Enumerates values whose checksum equals `cfg.sk`, obtained by rewriting
/// the fractional coefficient digits inside the precision window. Candidates
/// come out in order of increasing |v' - v|; each one has already been
/// re-parsed and re-checked, so csum(candidate) == sk always holds.
class DigitRetargeter {
 public:
  DigitRetargeter(double v, const ChecksumConfig& cfg);

  std::optional<double> next();

  /// Coefficient string indices that may be rewritten (may be empty).
  int first_position() const { return first_pos_; }
  int last_position() const { return last_pos_; }

 private:
  using Tail = unsigned __int128;

  std::optional<Tail> closest_at_least(Tail from) const;
  std::optional<Tail> closest_at_most(Tail from) const;
  std::optional<double> materialize(Tail tail) const;

  double original_;
  ChecksumConfig cfg_;
  std::string exponent_;
  std::string head_;    // coefficient up to and including the '.'
  std::string rest_;    // digits after the precision window, kept verbatim
  std::vector<int> target_sums_;
  int digits_ = 0;
  int first_pos_ = 0;
  int last_pos_ = -1;
  Tail tail_ = 0;
  Tail limit_ = 1;
  std::optional<Tail> up_;
  std::optional<Tail> down_;
  bool identity_pending_ = false;
  int rejected_ = 0;
};

/// Closest value to `v` (by digit rewriting) with csum == sk. Returns `v`
/// itself when it already matches. Throws RetargetInfeasible when the
/// threshold precondition fails or no digit assignment reaches sk.
double retarget_digits(double v, const ChecksumConfig& cfg);

}  // namespace csumlab
