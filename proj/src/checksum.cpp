#include "csumlab/checksum.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string_view>

#include "csumlab/decimal.hpp"
#include "csumlab/error.hpp"

namespace csumlab {
namespace {

constexpr int kZero = '0';
constexpr int kMaxRejections = 4096;

std::int64_t ascii_sum(std::string_view s) {
  std::int64_t total = 0;
  for (unsigned char c : s) total += c;
  return total;
}

int reduce(std::int64_t total, int m) {
  auto r = total % m;
  return static_cast<int>(r < 0 ? r + m : r);
}

using Tail = unsigned __int128;

std::vector<int> to_digits(Tail value, int width) {
  std::vector<int> digits(static_cast<std::size_t>(width), 0);
  for (int i = width - 1; i >= 0; --i) {
    digits[static_cast<std::size_t>(i)] = static_cast<int>(value % 10);
    value /= 10;
  }
  return digits;
}

Tail from_digits(const std::vector<int>& digits) {
  Tail value = 0;
  for (int d : digits) value = value * 10 + static_cast<unsigned>(d);
  return value;
}

// Smallest (fill_high == false) or largest (fill_high == true) digit string
// of the given width whose digits add up to `sum`.
void fill_suffix(std::vector<int>& digits, std::size_t begin, int sum, bool fill_high) {
  const std::size_t n = digits.size();
  for (std::size_t i = begin; i < n; ++i) digits[i] = 0;
  if (fill_high) {
    for (std::size_t i = begin; i < n && sum > 0; ++i) {
      digits[i] = std::min(9, sum);
      sum -= digits[i];
    }
  } else {
    for (std::size_t i = n; i > begin && sum > 0; --i) {
      digits[i - 1] = std::min(9, sum);
      sum -= digits[i - 1];
    }
  }
}

// Closest value >= from (upward) or <= from (downward) with digit sum `sum`.
std::optional<Tail> closest_with_sum(Tail from, int width, int sum, bool upward) {
  auto digits = to_digits(from, width);
  int total = 0;
  for (int d : digits) total += d;
  if (total == sum) return from;

  int prefix = total;
  for (int p = width - 1; p >= 0; --p) {
    const auto pos = static_cast<std::size_t>(p);
    prefix -= digits[pos];
    const int room = 9 * (width - 1 - p);
    if (upward) {
      for (int d = digits[pos] + 1; d <= 9; ++d) {
        const int rem = sum - prefix - d;
        if (rem >= 0 && rem <= room) {
          digits[pos] = d;
          fill_suffix(digits, pos + 1, rem, false);
          return from_digits(digits);
        }
      }
    } else {
      for (int d = digits[pos] - 1; d >= 0; --d) {
        const int rem = sum - prefix - d;
        if (rem >= 0 && rem <= room) {
          digits[pos] = d;
          fill_suffix(digits, pos + 1, rem, true);
          return from_digits(digits);
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

void ChecksumConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (m < 1) fail("checksum modulo must be positive");
  if (precision < 1) fail("checksum precision must be positive");
  if (lmax_coefficient < 1 || lmax_exponent < 1) fail("checksum padding lengths must be positive");
  if (precision > lmax_coefficient) fail("precision must not exceed lmax_coefficient");
  if (sk < 0 || sk >= m) fail("secret key must lie in [0, m)");
  if (th && (*th < 0 || *th > m)) fail("threshold must lie in [0, m]");
}

ScientificForm to_scientific_form(double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NonFiniteInput, "checksum input must be finite");
  }
  if (v == 0.0) return {"0", "0"};

  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::scientific);
  std::string_view text(buf.data(), static_cast<std::size_t>(ptr - buf.data()));
  const auto e = text.find('e');

  ScientificForm form;
  form.coefficient = std::string(text.substr(0, e));
  int exponent = 0;
  const auto exp_text = text.substr(e + 1);
  const char* first = exp_text.data();
  if (*first == '+') ++first;
  std::from_chars(first, exp_text.data() + exp_text.size(), exponent);
  form.exponent = std::to_string(exponent);
  return form;
}

std::int64_t coefficient_sum(const std::string& coefficient, const ChecksumConfig& cfg) {
  const auto len = std::min<std::size_t>(coefficient.size(), static_cast<std::size_t>(cfg.precision));
  const auto pad = std::max<std::int64_t>(0, cfg.lmax_coefficient - static_cast<std::int64_t>(len));
  return ascii_sum(std::string_view(coefficient).substr(0, len)) + pad * kZero;
}

std::int64_t exponent_sum(const std::string& exponent, const ChecksumConfig& cfg) {
  const auto pad =
      std::max<std::int64_t>(0, cfg.lmax_exponent - static_cast<std::int64_t>(exponent.size()));
  return ascii_sum(exponent) + pad * kZero;
}

int csum(const ScientificForm& form, const ChecksumConfig& cfg) {
  return reduce(coefficient_sum(form.coefficient, cfg) + exponent_sum(form.exponent, cfg), cfg.m);
}

int csum(double v, const ChecksumConfig& cfg) { return csum(to_scientific_form(v), cfg); }

DigitRetargeter::DigitRetargeter(double v, const ChecksumConfig& cfg) : original_(v), cfg_(cfg) {
  cfg_.validate();
  const auto form = to_scientific_form(v);
  identity_pending_ = csum(form, cfg_) == cfg_.sk;
  exponent_ = form.exponent;

  const auto dot = form.coefficient.find('.');
  std::string fraction;
  if (dot == std::string::npos) {
    head_ = form.coefficient + ".";
  } else {
    head_ = form.coefficient.substr(0, dot + 1);
    fraction = form.coefficient.substr(dot + 1);
  }

  digits_ = std::max(0, cfg_.precision - static_cast<int>(head_.size()));
  first_pos_ = static_cast<int>(head_.size());
  last_pos_ = first_pos_ + digits_ - 1;
  if (digits_ == 0) return;

  std::string window = fraction.substr(0, std::min<std::size_t>(fraction.size(), digits_));
  window.resize(static_cast<std::size_t>(digits_), '0');
  if (fraction.size() > static_cast<std::size_t>(digits_)) rest_ = fraction.substr(digits_);

  for (int i = 0; i < digits_; ++i) limit_ *= 10;
  for (char c : window) tail_ = tail_ * 10 + static_cast<unsigned>(c - '0');

  const std::string zeroed = head_ + std::string(static_cast<std::size_t>(digits_), '0') + rest_;
  const auto base = coefficient_sum(zeroed, cfg_) + exponent_sum(exponent_, cfg_);
  const int need = reduce(cfg_.sk - base, cfg_.m);
  for (int s = need; s <= 9 * digits_; s += cfg_.m) target_sums_.push_back(s);

  up_ = closest_at_least(tail_);
  down_ = tail_ == 0 ? std::nullopt : closest_at_most(tail_ - 1);
  if (up_ && *up_ == tail_) up_ = closest_at_least(tail_ + 1);
}

std::optional<DigitRetargeter::Tail> DigitRetargeter::closest_at_least(Tail from) const {
  if (from >= limit_) return std::nullopt;
  std::optional<Tail> best;
  for (int s : target_sums_) {
    auto c = closest_with_sum(from, digits_, s, true);
    if (c && (!best || *c < *best)) best = c;
  }
  return best;
}

std::optional<DigitRetargeter::Tail> DigitRetargeter::closest_at_most(Tail from) const {
  std::optional<Tail> best;
  for (int s : target_sums_) {
    auto c = closest_with_sum(from, digits_, s, false);
    if (c && (!best || *c > *best)) best = c;
  }
  return best;
}

std::optional<double> DigitRetargeter::materialize(Tail tail) const {
  std::string window(static_cast<std::size_t>(digits_), '0');
  for (int i = digits_ - 1; i >= 0; --i) {
    window[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(tail % 10));
    tail /= 10;
  }
  const std::string text = head_ + window + rest_ + "e" + exponent_;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || !std::isfinite(value) || value == original_) return std::nullopt;
  if (std::signbit(value) != std::signbit(original_)) return std::nullopt;
  const auto form = to_scientific_form(value);
  if (form.exponent != exponent_ || csum(form, cfg_) != cfg_.sk) return std::nullopt;
  return value;
}

std::optional<double> DigitRetargeter::next() {
  if (identity_pending_) {
    identity_pending_ = false;
    return original_;
  }
  while (rejected_ < kMaxRejections && (up_ || down_)) {
    Tail chosen = 0;
    const bool take_up =
        up_ && (!down_ || (*up_ - tail_) <= (tail_ - *down_));
    if (take_up) {
      chosen = *up_;
      up_ = closest_at_least(chosen + 1);
    } else {
      chosen = *down_;
      down_ = chosen == 0 ? std::nullopt : closest_at_most(chosen - 1);
    }
    if (auto value = materialize(chosen)) return value;
    ++rejected_;
  }
  return std::nullopt;
}

double retarget_digits(double v, const ChecksumConfig& cfg) {
  cfg.validate();
  const int current = csum(v, cfg);
  if (std::abs(current - cfg.sk) >= cfg.threshold()) {
    throw Error(ErrorCode::RetargetInfeasible,
                "csum " + std::to_string(current) + " is not within threshold " +
                    std::to_string(cfg.threshold()) + " of sk " + std::to_string(cfg.sk));
  }
  DigitRetargeter search(v, cfg);
  if (auto value = search.next()) return *value;
  throw Error(ErrorCode::RetargetInfeasible,
              "no digit assignment at coefficient positions " +
                  std::to_string(search.first_position()) + ".." +
                  std::to_string(search.last_position()) + " of " + format_double(v) +
                  " reaches sk " + std::to_string(cfg.sk));
}

}  // namespace csumlab
