#include "wavesel/kernel.hpp"

#include <cmath>
#include <numeric>

#include "wavesel/errors.hpp"

namespace wavesel {

std::size_t int_pow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::size_t encode_digits(std::span<const int> digits, int radix) {
  std::size_t idx = 0;
  for (int d : digits) {
    if (d < 0 || d >= radix) throw ValidationError("digit out of range");
    idx = idx * static_cast<std::size_t>(radix) + static_cast<std::size_t>(d);
  }
  return idx;
}

std::vector<int> decode_digits(std::size_t index, int radix, int count) {
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = count - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(index % static_cast<std::size_t>(radix));
    index /= static_cast<std::size_t>(radix);
  }
  return out;
}

std::size_t ChannelKernel::n_rows() const {
  return int_pow(static_cast<std::size_t>(n_channel), order) * int_pow(static_cast<std::size_t>(n_wav), order);
}

std::size_t ChannelKernel::row_index(std::span<const int> c_hist, std::span<const int> w_hist) const {
  if (static_cast<int>(c_hist.size()) != order || static_cast<int>(w_hist.size()) != order)
    throw ValidationError("kernel history length must equal the kernel order");
  return encode_digits(c_hist, n_channel) * int_pow(static_cast<std::size_t>(n_wav), order) +
         encode_digits(w_hist, n_wav);
}

std::span<const double> ChannelKernel::row(std::size_t r) const {
  return std::span<const double>(table).subspan(r * static_cast<std::size_t>(n_channel),
                                                static_cast<std::size_t>(n_channel));
}

std::span<const double> ChannelKernel::row(std::span<const int> c_hist, std::span<const int> w_hist) const {
  return row(row_index(c_hist, w_hist));
}

void ChannelKernel::validate(double tol) const {
  if (order < 1 || n_channel < 1 || n_wav < 1) throw ValidationError("kernel sizes must be positive");
  if (table.size() != n_rows() * static_cast<std::size_t>(n_channel))
    throw ValidationError("kernel table has the wrong size");
  for (std::size_t r = 0; r < n_rows(); ++r) {
    const auto p = row(r);
    double s = 0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ValidationError("kernel entry is negative or NaN");
      s += v;
    }
    if (std::abs(s - 1.0) > tol) throw ValidationError("kernel row does not sum to one");
  }
}

nlohmann::json ChannelKernel::to_json() const {
  return {{"format", "wavesel-channel-kernel"},
          {"version", 1},
          {"order", order},
          {"n_channel", n_channel},
          {"n_wav", n_wav},
          {"layout", "row = (channel history oldest first, waveform history oldest first)"},
          {"table", table}};
}

ChannelKernel ChannelKernel::from_json(const nlohmann::json& j) {
  ChannelKernel k;
  k.order = j.at("order").get<int>();
  k.n_channel = j.at("n_channel").get<int>();
  k.n_wav = j.at("n_wav").get<int>();
  j.at("table").get_to(k.table);
  k.validate(1e-9);
  return k;
}

double ObservationModel::p_confusion(int c, int c_obs) const {
  return confusion[static_cast<std::size_t>(c * n_channel + c_obs)];
}

double ObservationModel::p_quality(int c, int w, int q) const {
  return quality[static_cast<std::size_t>((c * n_wav + w) * n_quality + q)];
}

double ObservationModel::expected_cost(int c, int w, int q) const {
  return cost[static_cast<std::size_t>((c * n_wav + w) * n_quality + q)];
}

double ObservationModel::p_obs(int c, int w, int y) const {
  return p_confusion(c, y / n_quality) * p_quality(c, w, y % n_quality);
}

void ObservationModel::validate(double tol) const {
  const auto cq = static_cast<std::size_t>(n_channel * n_wav * n_quality);
  if (confusion.size() != static_cast<std::size_t>(n_channel * n_channel) || quality.size() != cq ||
      cost.size() != cq)
    throw ValidationError("observation model tables have the wrong size");
  for (int c = 0; c < n_channel; ++c) {
    double s = 0;
    for (int o = 0; o < n_channel; ++o) s += p_confusion(c, o);
    if (std::abs(s - 1.0) > tol) throw ValidationError("confusion row does not sum to one");
    for (int w = 0; w < n_wav; ++w) {
      double t = 0;
      for (int q = 0; q < n_quality; ++q) t += p_quality(c, w, q);
      if (std::abs(t - 1.0) > tol) throw ValidationError("quality row does not sum to one");
    }
  }
}

ObservationModel ObservationModel::direct(int n_channel, int n_wav, std::vector<double> cost_by_channel_wav) {
  ObservationModel m;
  m.n_channel = n_channel;
  m.n_wav = n_wav;
  m.n_quality = 1;
  m.confusion.assign(static_cast<std::size_t>(n_channel * n_channel), 0.0);
  for (int c = 0; c < n_channel; ++c) m.confusion[static_cast<std::size_t>(c * n_channel + c)] = 1.0;
  m.quality.assign(static_cast<std::size_t>(n_channel * n_wav), 1.0);
  if (cost_by_channel_wav.size() != static_cast<std::size_t>(n_channel * n_wav))
    throw ValidationError("cost table must have n_channel * n_wav entries");
  m.cost = std::move(cost_by_channel_wav);
  return m;
}

}  // namespace wavesel
