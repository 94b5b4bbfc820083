#include "tbm/system_model.hpp"

#include <stdexcept>

namespace tbm {

void TbmConfig::validate() const {
  if (dims.empty()) throw std::invalid_argument("TbmConfig: no data modes");
  for (auto t : dims)
    if (t <= 1) throw std::invalid_argument("TbmConfig: all T_i must be > 1");
  if (N < 1 || Ka < 1) throw std::invalid_argument("TbmConfig: N and Ka must be >= 1");
  if (sigma2 <= 0.0) throw std::invalid_argument("TbmConfig: sigma2 must be > 0");
  if (!codebooks.empty()) {
    if (static_cast<int>(codebooks.size()) != d())
      throw std::invalid_argument("TbmConfig: need one codebook per data mode");
    for (int i = 0; i < d(); ++i)
      if (codebooks[static_cast<std::size_t>(i)].dim() != dims[static_cast<std::size_t>(i)])
        throw std::invalid_argument("TbmConfig: codebook dimension mismatch");
  }
}

std::vector<CVec> FactorSet::user_factors(Eigen::Index k) const {
  std::vector<CVec> f;
  f.reserve(x.size() + 1);
  for (const auto& mode : x) f.push_back(mode[static_cast<std::size_t>(k)]);
  f.push_back(h[static_cast<std::size_t>(k)]);
  return f;
}

std::vector<CVec> draw_channels(const TbmConfig& cfg, RngStream& rng) {
  std::vector<CVec> h;
  h.reserve(static_cast<std::size_t>(cfg.Ka));
  for (Eigen::Index k = 0; k < cfg.Ka; ++k) h.push_back(rng.cnormal_vec(cfg.N));
  return h;
}

Transmission transmit_with_channels(const TbmConfig& cfg,
                                    const std::vector<std::vector<int>>& payloads,
                                    const std::vector<CVec>& channels, RngStream& rng) {
  cfg.validate();
  if (cfg.codebooks.empty()) throw std::invalid_argument("transmit: config carries no codebooks");
  if (static_cast<Eigen::Index>(payloads.size()) != cfg.Ka)
    throw std::invalid_argument("transmit: need one payload per user");
  if (static_cast<Eigen::Index>(channels.size()) != cfg.Ka)
    throw std::invalid_argument("transmit: need one channel per user");

  Transmission tx;
  tx.payloads = payloads;
  tx.factors.x.resize(static_cast<std::size_t>(cfg.d()));
  for (auto& mode : tx.factors.x) mode.resize(static_cast<std::size_t>(cfg.Ka));
  tx.factors.h = channels;

  for (Eigen::Index k = 0; k < cfg.Ka; ++k) {
    const auto& bits = payloads[static_cast<std::size_t>(k)];
    if (static_cast<int>(bits.size()) != cfg.bits_per_block())
      throw std::invalid_argument("transmit: payload length mismatch");
    std::size_t off = 0;
    for (int i = 0; i < cfg.d(); ++i) {
      const auto& cb = cfg.codebooks[static_cast<std::size_t>(i)];
      std::vector<int> sym_bits(bits.begin() + static_cast<std::ptrdiff_t>(off),
                                bits.begin() + static_cast<std::ptrdiff_t>(off) +
                                    cb.bits_per_symbol());
      off += static_cast<std::size_t>(cb.bits_per_symbol());
      tx.factors.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
          map_bits(cb, sym_bits);
    }
  }

  CTensor y(cfg.tensor_shape());
  for (Eigen::Index k = 0; k < cfg.Ka; ++k)
    y.data() += rank1(tx.factors.user_factors(k)).data();
  const double s = std::sqrt(cfg.sigma2);
  for (Eigen::Index n = 0; n < y.size(); ++n) y.data()(n) += s * rng.cnormal();
  tx.y = std::move(y);

  tx.snr_inst.reserve(static_cast<std::size_t>(cfg.Ka));
  for (Eigen::Index k = 0; k < cfg.Ka; ++k)
    tx.snr_inst.push_back(snr_instantaneous(cfg, tx.factors.h[static_cast<std::size_t>(k)]));
  return tx;
}

Transmission transmit(const TbmConfig& cfg, const std::vector<std::vector<int>>& payloads,
                      RngStream& rng) {
  auto channels = draw_channels(cfg, rng);
  return transmit_with_channels(cfg, payloads, channels, rng);
}

double snr_instantaneous(const TbmConfig& cfg, const CVec& h_k) {
  if (cfg.sigma2 <= 0.0) throw std::invalid_argument("snr_instantaneous: sigma2 must be > 0");
  return h_k.squaredNorm() / (static_cast<double>(cfg.N) * cfg.sigma2);
}

}  // namespace tbm
