#pragma once

// Independent reference implementations used as test oracles. They read the
// parameters element by element and share no code with src/.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hlstm/net.hpp"
#include "hlstm/pipeline.hpp"

namespace oracle {

using hlstm::Index;

inline double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

using Seq = std::vector<std::vector<double>>;

// One layer over a whole sequence, zero initial state, plain loops.
inline Seq lstm_layer(const hlstm::LstmStackParams& p, int layer, const Seq& xs) {
  const auto& cfg = p.config();
  const int h = cfg.hidden_dim;
  const int in = cfg.layer_input_dim(layer);
  const auto Wx = p.tensor(static_cast<std::size_t>(3 * layer));
  const auto Wh = p.tensor(static_cast<std::size_t>(3 * layer + 1));
  const auto b = p.tensor(static_cast<std::size_t>(3 * layer + 2));
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  Seq out;
  for (const auto& x : xs) {
    std::vector<double> z(4 * h);
    for (int r = 0; r < 4 * h; ++r) {
      double acc = b(r, 0);
      for (int j = 0; j < in; ++j) acc += Wx(r, j) * x[j];
      for (int j = 0; j < h; ++j) acc += Wh(r, j) * hs[j];
      z[r] = acc;
    }
    std::vector<double> hn(h);
    for (int k = 0; k < h; ++k) {
      const double ig = sig(z[k]);
      const double fg = sig(z[h + k]);
      const double og = sig(z[2 * h + k]);
      const double cand = std::tanh(z[3 * h + k]);
      cs[k] = fg * cs[k] + ig * cand;
      hn[k] = og * std::tanh(cs[k]);
    }
    hs = hn;
    out.push_back(hs);
  }
  return out;
}

// Full forecaster output for one window (rows oldest first).
inline std::vector<double> stack_output(const hlstm::LstmStackParams& p, const hlstm::RowMatrix& window) {
  const auto& cfg = p.config();
  Seq seq;
  for (Index t = 0; t < window.rows(); ++t) {
    seq.emplace_back(window.row(t).data(), window.row(t).data() + window.cols());
  }
  Seq top = seq;
  for (int n = 0; n < cfg.n_layers; ++n) top = lstm_layer(p, n, top);
  const std::size_t base = static_cast<std::size_t>(3 * cfg.n_layers);
  const auto Why = p.tensor(base);
  const auto by = p.tensor(base + (cfg.hybrid ? 2 : 1));
  std::vector<double> y(cfg.output_dim());
  for (int o = 0; o < cfg.output_dim(); ++o) {
    double acc = by(o, 0);
    for (int k = 0; k < cfg.hidden_dim; ++k) acc += Why(o, k) * top.back()[k];
    if (cfg.hybrid) {
      const auto Wey = p.tensor(base + 1);
      for (int j = 0; j < cfg.empirical_dim; ++j) acc += Wey(o, j) * seq.back()[cfg.input_dim + j];
    }
    y[o] = acc;
  }
  return y;
}

// sum over samples of ||F - y||^2 / B.
inline double mse_loss(const hlstm::LstmStackParams& p, const std::vector<hlstm::RowMatrix>& windows,
                       const std::vector<std::vector<double>>& labels) {
  double total = 0.0;
  for (std::size_t s = 0; s < windows.size(); ++s) {
    const auto y = stack_output(p, windows[s]);
    for (std::size_t o = 0; o < y.size(); ++o) total += (y[o] - labels[s][o]) * (y[o] - labels[s][o]);
  }
  return total / static_cast<double>(windows.size());
}

inline hlstm::Vector central_difference(const hlstm::LstmStackParams& p,
                                        const std::function<double(const hlstm::LstmStackParams&)>& loss,
                                        double step) {
  hlstm::LstmStackParams q = p;
  hlstm::Vector g(p.size());
  for (Index k = 0; k < p.size(); ++k) {
    const double w = q.values()[k];
    q.values()[k] = w + step;
    const double up = loss(q);
    q.values()[k] = w - step;
    const double down = loss(q);
    q.values()[k] = w;
    g[k] = (up - down) / (2.0 * step);
  }
  return g;
}

inline hlstm::RowMatrix random_rows(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  hlstm::RowMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

}  // namespace oracle
