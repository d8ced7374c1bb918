#include "abp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/special_functions/beta.hpp>

#include "abp/error.hpp"

namespace abp {

ConfusionMatrix score(const std::vector<bool>& flags, std::span<const BinaryLabel> labels) {
  if (!(flags.size() == labels.size()))
    fail(Errc::LengthMismatch,
         "decisions and labels differ in length (" + std::to_string(flags.size()) + " vs " +
           std::to_string(labels.size()) + ")");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const bool pos = labels[i] == BinaryLabel::non_normal;
    if (flags[i])
      ++(pos ? cm.tp : cm.fp);
    else
      ++(pos ? cm.fn : cm.tn);
  }
  return cm;
}

ConfusionMatrix score(std::span<const HpdDecision> decisions) {
  std::vector<bool> flags;
  std::vector<BinaryLabel> labels;
  for (const auto& d : decisions) {
    flags.push_back(d.suspicious());
    labels.push_back(binarize_label(d.label));
  }
  return score(flags, labels);
}

ProportionInterval clopper_pearson(std::size_t k, std::size_t n, double level) {
  require(k <= n, Errc::InvalidParameter, "successes exceed trials");
  require(level > 0.0 && level < 1.0, Errc::InvalidParameter, "confidence level must lie in (0, 1)");
  if (n == 0) return {0.0, 1.0};
  const double a = 1.0 - level;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  ProportionInterval ci;
  ci.lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, a / 2.0);
  ci.hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - a / 2.0);
  return ci;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  auto ratio = [&](std::size_t num, std::size_t den, unsigned bit) {
    if (den == 0) {
      m.degenerate |= bit;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(cm.tp, cm.tp + cm.fp, kNoPredictedPositives);
  m.sensitivity = ratio(cm.tp, cm.tp + cm.fn, kNoActualPositives);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp, kNoActualNegatives);
  if (m.precision + m.sensitivity > 0.0)
    m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
  else
    m.degenerate |= kNoPrecisionRecall;
  m.g_mean = std::sqrt(m.sensitivity * m.specificity);
  m.balanced_accuracy = (m.sensitivity + m.specificity) / 2.0;
  m.overall_accuracy = ratio(cm.tp + cm.tn, cm.total(), kEmpty);
  m.accuracy_ci = clopper_pearson(cm.tp + cm.tn, cm.total());
  return m;
}

namespace {

struct Sweep {
  // cumulative (tp, fp) after admitting each distinct score, highest first
  std::vector<std::size_t> tp;
  std::vector<std::size_t> fp;
  std::vector<double> threshold;
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Sweep sweep(std::span<const double> scores, std::span<const BinaryLabel> labels) {
  require(scores.size() == labels.size(), Errc::LengthMismatch, "scores and labels differ in length");
  Sweep s;
  for (auto l : labels) ++(l == BinaryLabel::non_normal ? s.pos : s.neg);
  require(s.pos > 0 && s.neg > 0, Errc::SingleClassInput, "curves need both classes present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i)
      ++(labels[order[i]] == BinaryLabel::non_normal ? tp : fp);
    s.tp.push_back(tp);
    s.fp.push_back(fp);
    s.threshold.push_back(t);
  }
  return s;
}

}  // namespace

Curve roc_curve(std::span<const double> scores, std::span<const BinaryLabel> labels) {
  const Sweep s = sweep(scores, labels);
  const double p = static_cast<double>(s.pos);
  const double n = static_cast<double>(s.neg);
  Curve c;
  c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t twice_area = 0;  // sum dFP * (TP_prev + TP)
  std::size_t tp_prev = 0;
  std::size_t fp_prev = 0;
  for (std::size_t i = 0; i < s.tp.size(); ++i) {
    twice_area += static_cast<std::uint64_t>(s.fp[i] - fp_prev) * (tp_prev + s.tp[i]);
    c.points.push_back({static_cast<double>(s.fp[i]) / n, static_cast<double>(s.tp[i]) / p, s.threshold[i]});
    tp_prev = s.tp[i];
    fp_prev = s.fp[i];
  }
  // the last distinct score admits everything, so the curve already ends at (1, 1)
  c.auc = static_cast<double>(twice_area) / (2.0 * p * n);
  return c;
}

Curve pr_curve(std::span<const double> scores, std::span<const BinaryLabel> labels) {
  const Sweep s = sweep(scores, labels);
  const double p = static_cast<double>(s.pos);
  Curve c;
  auto precision_at = [&](std::size_t i) {
    return static_cast<double>(s.tp[i]) / static_cast<double>(s.tp[i] + s.fp[i]);
  };
  c.points.push_back({0.0, precision_at(0), std::numeric_limits<double>::infinity()});
  for (std::size_t i = 0; i < s.tp.size(); ++i)
    c.points.push_back({static_cast<double>(s.tp[i]) / p, precision_at(i), s.threshold[i]});
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const auto& a = c.points[i - 1];
    const auto& b = c.points[i];
    c.auc += (b.x - a.x) * (a.y + b.y) / 2.0;
  }
  return c;
}

EvalReport evaluate(std::span<const HpdDecision> decisions, bool oversample, Rng& rng) {
  require(!decisions.empty(), Errc::TooFewSamples, "no decisions to evaluate");
  std::vector<BinaryLabel> labels;
  for (const auto& d : decisions) labels.push_back(binarize_label(d.label));
  std::vector<std::size_t> rows(decisions.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (oversample) rows = random_oversample(labels, rng).indices;

  std::vector<bool> flags;
  std::vector<double> scores;
  std::vector<BinaryLabel> lab;
  for (std::size_t r : rows) {
    flags.push_back(decisions[r].suspicious());
    scores.push_back(decisions[r].score);
    lab.push_back(labels[r]);
  }
  EvalReport rep;
  rep.policy = decisions.front().policy;
  rep.oversampled = oversample;
  rep.cm = score(flags, lab);
  rep.m = metrics(rep.cm);
  const bool both = rep.cm.tp + rep.cm.fn > 0 && rep.cm.tn + rep.cm.fp > 0;
  if (both) {
    rep.roc = roc_curve(scores, lab);
    rep.pr = pr_curve(scores, lab);
  }
  return rep;
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "policy,oversampled,g_mean,f1,precision,sensitivity,specificity,balanced_accuracy,"
         "overall_accuracy,accuracy_ci_lo,accuracy_ci_hi,tp,fp,tn,fn,roc_auc,pr_auc,degenerate\n";
  for (const auto& r : reports) {
    const auto& m = r.m;
    out << r.policy << ',' << (r.oversampled ? "post" : "pre") << ',' << format_double(m.g_mean)
        << ',' << format_double(m.f1) << ',' << format_double(m.precision) << ','
        << format_double(m.sensitivity) << ',' << format_double(m.specificity) << ','
        << format_double(m.balanced_accuracy) << ',' << format_double(m.overall_accuracy) << ','
        << format_double(m.accuracy_ci.lo) << ',' << format_double(m.accuracy_ci.hi) << ','
        << r.cm.tp << ',' << r.cm.fp << ',' << r.cm.tn << ',' << r.cm.fn << ','
        << format_double(r.roc.auc) << ',' << format_double(r.pr.auc) << ',' << m.degenerate << '\n';
  }
}

void write_curves_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "policy,oversampled,curve,x,y,threshold\n";
  for (const auto& r : reports) {
    for (const auto* c : {&r.roc, &r.pr})
      for (const auto& p : c->points)
        out << r.policy << ',' << (r.oversampled ? "post" : "pre") << ','
            << (c == &r.roc ? "roc" : "pr") << ',' << format_double(p.x) << ','
            << format_double(p.y) << ',' << format_double(p.threshold) << '\n';
  }
}

void write_curves_svg(std::ostream& out, std::span<const EvalReport> reports) {
  constexpr double panel = 320.0;
  constexpr double pad = 40.0;
  constexpr double legend = 18.0;
  const double height = pad * 2 + panel + legend * static_cast<double>(reports.size());
  static constexpr const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * panel + 3 * pad
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const char* titles[] = {"ROC (FPR vs TPR)", "Precision-Recall"};
  for (int k = 0; k < 2; ++k) {
    const double x0 = pad + k * (panel + pad);
    out << "<rect x=\"" << x0 << "\" y=\"" << pad << "\" width=\"" << panel << "\" height=\"" << panel
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << x0 << "\" y=\"" << pad - 8 << "\">" << titles[k] << "</text>\n";
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const char* colour = palette[i % std::size(palette)];
    const Curve* curves[] = {&r.roc, &r.pr};
    for (int k = 0; k < 2; ++k) {
      const double x0 = pad + k * (panel + pad);
      out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
      for (const auto& p : curves[k]->points)
        out << x0 + p.x * panel << ',' << pad + (1.0 - p.y) * panel << ' ';
      out << "\"/>\n";
    }
    out << "<text x=\"" << pad << "\" y=\"" << pad * 1.5 + panel + legend * static_cast<double>(i)
        << "\" fill=\"" << colour << "\">" << r.policy << (r.oversampled ? " (post)" : "")
        << "  ROC AUC " << format_double(std::round(r.roc.auc * 1000) / 1000) << ", PR AUC "
        << format_double(std::round(r.pr.auc * 1000) / 1000) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace abp
