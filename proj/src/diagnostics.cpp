#include "sigvae/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <stdexcept>

#include "json.hpp"

#include "sigvae/textio.hpp"

namespace sigvae::diagnostics {

CollapseReport collapse_report(const vae::VaeParams& params, const Matrix& data,
                               const std::vector<vae::LossBreakdown>& history, double threshold) {
  CollapseReport r;
  r.threshold = threshold;
  const std::size_t ld = params.config.latent_dim;
  r.per_dim_kl.assign(ld, 0.0);
  if (data.rows() > 0) {
    const vae::Encoded enc = vae::encode(params, data);
    for (std::size_t row = 0; row < data.rows(); ++row) {
      const auto terms = vae::kl_per_dim(enc.mu.row(row), enc.logvar.row(row));
      for (std::size_t d = 0; d < ld; ++d) r.per_dim_kl[d] += terms[d];
    }
    for (double& v : r.per_dim_kl) v /= static_cast<double>(data.rows());
  }
  for (std::size_t d = 0; d < ld; ++d)
    if (r.per_dim_kl[d] < threshold) r.collapsed_dims.push_back(d);
  for (const auto& l : history) {
    const double raw = l.kl + l.recon;
    const double weighted = l.beta_effective * l.kl + l.recon;
    r.kl_fraction_by_epoch.push_back(raw > 0.0 ? l.kl / raw : 0.0);
    r.weighted_kl_fraction_by_epoch.push_back(weighted > 0.0 ? l.beta_effective * l.kl / weighted
                                                             : 0.0);
  }
  return r;
}

std::string collapse_report_json(const CollapseReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["latent_dim"] = report.per_dim_kl.size();
  j["per_dim_kl"] = report.per_dim_kl;
  j["collapsed_dims"] = report.collapsed_dims;
  j["collapsed_fraction"] =
      report.per_dim_kl.empty()
          ? 0.0
          : static_cast<double>(report.collapsed_dims.size()) / static_cast<double>(report.per_dim_kl.size());
  j["kl_fraction_by_epoch"] = report.kl_fraction_by_epoch;
  j["weighted_kl_fraction_by_epoch"] = report.weighted_kl_fraction_by_epoch;
  return j.dump(2) + "\n";
}

TraversalGrid latent_traversal(const vae::VaeParams& params, std::size_t dim, double lo,
                               double hi, std::size_t steps) {
  const std::size_t ld = params.config.latent_dim;
  if (dim >= ld)
    throw std::out_of_range("latent_traversal: dim " + std::to_string(dim) + " >= latent_dim " +
                            std::to_string(ld));
  if (!(lo < hi)) throw std::invalid_argument("latent_traversal: lo must be < hi");
  if (steps < 2) throw std::invalid_argument("latent_traversal: steps must be >= 2");
  TraversalGrid grid;
  grid.dim = dim;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const double v = i + 1 == steps ? hi : lo + (hi - lo) * t;
    std::vector<double> z(ld, 0.0);
    z[dim] = v;
    grid.values.push_back(v);
    grid.images.push_back(vae::generate(params, z));
  }
  return grid;
}

GrayImage montage(const TraversalGrid& grid) {
  if (grid.images.empty()) throw std::invalid_argument("montage: empty grid");
  const std::size_t w = grid.images.front().width(), h = grid.images.front().height();
  const std::size_t n = grid.images.size();
  GrayImage out(n * w + (n - 1), h, kBackground);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(i * (w + 1) + x, y) = grid.images[i].at(x, y);
  return out;
}

std::vector<BetaSweepEntry> beta_sweep(const Matrix& data, const vae::VaeConfig& base,
                                       const std::vector<double>& betas, double lo, double hi,
                                       std::size_t steps) {
  if (betas.empty()) throw std::invalid_argument("beta_sweep: no beta values");
  std::vector<BetaSweepEntry> out(betas.size());
  std::vector<std::exception_ptr> errors(betas.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(betas.size()); ++i) {
    try {
      auto& entry = out[static_cast<std::size_t>(i)];
      vae::VaeConfig cfg = base;
      cfg.beta = betas[static_cast<std::size_t>(i)];
      entry.beta = cfg.beta;
      entry.model = vae::train(data, cfg);
      for (std::size_t d = 0; d < cfg.latent_dim; ++d)
        entry.grids.push_back(latent_traversal(entry.model.params, d, lo, hi, steps));
      entry.collapse = collapse_report(entry.model.params, data, entry.model.history);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

StackedArea loss_breakdown_geometry(const std::vector<vae::LossBreakdown>& history, double width,
                                    double height) {
  if (history.empty()) throw std::invalid_argument("loss_breakdown: empty history");
  StackedArea g;
  g.width = width;
  g.height = height;
  double peak = 0.0;
  for (const auto& l : history) peak = std::max(peak, l.recon + l.beta_effective * l.kl);
  g.y_scale = peak > 0.0 ? peak / height : 1.0;

  const double col = width / static_cast<double>(history.size());
  auto y_of = [&](double v) { return height - v / g.y_scale; };

  // Recon region: baseline up to the recon step curve.
  g.recon_polygon.push_back({0.0, height});
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double x0 = col * static_cast<double>(i), x1 = col * static_cast<double>(i + 1);
    const double y = y_of(history[i].recon);
    g.recon_polygon.push_back({x0, y});
    g.recon_polygon.push_back({x1, y});
  }
  g.recon_polygon.push_back({width, height});

  // KL region: total step curve left to right, recon curve back right to left.
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double x0 = col * static_cast<double>(i), x1 = col * static_cast<double>(i + 1);
    const double y = y_of(history[i].recon + history[i].beta_effective * history[i].kl);
    g.kl_polygon.push_back({x0, y});
    g.kl_polygon.push_back({x1, y});
  }
  for (std::size_t i = history.size(); i-- > 0;) {
    const double x0 = col * static_cast<double>(i), x1 = col * static_cast<double>(i + 1);
    const double y = y_of(history[i].recon);
    g.kl_polygon.push_back({x1, y});
    g.kl_polygon.push_back({x0, y});
  }

  // Collapse repeated vertices (a single epoch yields plain rectangles).
  for (auto* poly : {&g.recon_polygon, &g.kl_polygon})
    poly->erase(std::unique(poly->begin(), poly->end()), poly->end());
  return g;
}

namespace {
std::string points_attr(const std::vector<std::pair<double, double>>& pts) {
  std::string s;
  char buf[64];
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", s.empty() ? "" : " ", x, y);
    s += buf;
  }
  return s;
}
}  // namespace

std::string loss_breakdown_svg(const std::vector<vae::LossBreakdown>& history) {
  const double margin = 48.0;
  const StackedArea g = loss_breakdown_geometry(history);
  char buf[512];
  std::string svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                g.width + 2 * margin, g.height + 2 * margin, g.width + 2 * margin,
                g.height + 2 * margin);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<g transform=\"translate(%.0f,%.0f)\">\n", margin, margin);
  svg += buf;
  svg += "<polygon class=\"recon\" fill=\"#1f77b4\" points=\"" + points_attr(g.recon_polygon) + "\"/>\n";
  svg += "<polygon class=\"kl\" fill=\"#ff7f0e\" points=\"" + points_attr(g.kl_polygon) + "\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"0\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\" stroke=\"black\"/>\n"
                "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"%.3f\" stroke=\"black\"/>\n",
                g.height, g.width, g.height, g.height);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"0\" y=\"-8\" font-size=\"12\" font-family=\"sans-serif\">"
                "loss (peak %s)</text>\n"
                "<text x=\"%.3f\" y=\"%.3f\" font-size=\"12\" font-family=\"sans-serif\" "
                "text-anchor=\"end\">epoch (%zu)</text>\n",
                format_double(g.y_scale * g.height).c_str(), g.width, g.height + 20,
                history.size());
  svg += buf;
  svg += "<text x=\"8\" y=\"16\" font-size=\"12\" fill=\"#1f77b4\" font-family=\"sans-serif\">"
         "reconstruction (MSE)</text>\n";
  svg += "<text x=\"8\" y=\"32\" font-size=\"12\" fill=\"#ff7f0e\" font-family=\"sans-serif\">"
         "beta * KL</text>\n";
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace sigvae::diagnostics
