#include "bagged_rl/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

namespace bagged_rl {

namespace {

constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

}  // namespace

std::string plot_svg(const Summary& s, const std::string& title) {
  const double W = 720, H = 440, left = 70, right = 160, top = 40, bottom = 50;
  std::size_t days = 0;
  double lo = 0.0, hi = 0.0;
  for (const auto& a : s.agents) {
    days = std::max(days, a.daily_mean.size());
    for (double v : a.daily_lo) lo = std::min(lo, v);
    for (double v : a.daily_hi) hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pw = W - left - right, ph = H - top - bottom;
  auto X = [&](std::size_t d) { return left + (days > 1 ? pw * static_cast<double>(d) / (days - 1) : 0.0); };
  auto Y = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) + "\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
  o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  // zero line and axis labels
  o += "<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(left + pw) + "\" y1=\"" + fmt(Y(0)) + "\" y2=\"" + fmt(Y(0)) +
       "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(Y(v) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
         fmt(v) + "</text>\n";
  }
  if (days > 0) {
    for (int i = 0; i <= 4; ++i) {
      const std::size_t d = (days - 1) * static_cast<std::size_t>(i) / 4;
      o += "<text x=\"" + fmt(X(d)) + "\" y=\"" + fmt(top + ph + 16) + "\" text-anchor=\"middle\" font-size=\"11\">" +
           std::to_string(d + 1) + "</text>\n";
    }
  }
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(H - 10) + "\" text-anchor=\"middle\" font-size=\"12\">day</text>\n";

  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    const char* col = kColors[i % kColors.size()];
    if (!a.daily_mean.empty()) {
      std::string band, line;
      for (std::size_t d = 0; d < a.daily_hi.size(); ++d) band += fmt(X(d)) + "," + fmt(Y(a.daily_hi[d])) + " ";
      for (std::size_t d = a.daily_lo.size(); d-- > 0;) band += fmt(X(d)) + "," + fmt(Y(a.daily_lo[d])) + " ";
      for (std::size_t d = 0; d < a.daily_mean.size(); ++d) line += fmt(X(d)) + "," + fmt(Y(a.daily_mean[d])) + " ";
      o += std::string("<polygon points=\"") + band + "\" fill=\"" + col + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
      o += std::string("<polyline points=\"") + line + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.8\"/>\n";
    }
    const double ly = top + 16 + 18.0 * static_cast<double>(i);
    o += "<line x1=\"" + fmt(W - right + 12) + "\" x2=\"" + fmt(W - right + 34) + "\" y1=\"" + fmt(ly) + "\" y2=\"" +
         fmt(ly) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(W - right + 40) + "\" y=\"" + fmt(ly + 4) + "\" font-size=\"12\">" + escape(a.agent) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace bagged_rl
