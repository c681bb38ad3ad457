#include "nebp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace nebp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Classic Hungarian method with row/column potentials, O(n^2 m) for n rows
// assigned into m >= n columns.
std::vector<int> hungarian(const Matrix& a) {
  const std::size_t n = a.rows, m = a.cols;
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

double dist2d(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

struct ThresholdStats {
  std::size_t tp = 0, fp = 0, fn = 0, ids = 0;
  double dist_sum = 0.0;
};

// Optimal per-frame matching at one score threshold; switch counts track the
// last matched track id per truth object across the whole sequence.
ThresholdStats stats_at_threshold(const std::vector<TrackFrame>& tracks,
                                  const std::vector<TruthFrame>& truth, double gate,
                                  double threshold) {
  constexpr double kFar = 1e6;  // dominates any in-gate distance
  ThresholdStats s;
  std::map<std::uint64_t, std::uint64_t> last_track;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    std::vector<const TrackPoint*> kept;
    for (const TrackPoint& t : tracks[k])
      if (t.score >= threshold) kept.push_back(&t);
    const std::size_t ne = kept.size(), nt = truth[k].size();
    std::size_t matched = 0;
    if (ne > 0 && nt > 0) {
      const bool transpose = ne > nt;
      const std::size_t rows = transpose ? nt : ne;
      const std::size_t cols = transpose ? ne : nt;
      Matrix cost(rows, cols);
      for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t j = 0; j < nt; ++j) {
          const double d = dist2d(kept[i]->pos, truth[k][j].pos);
          const double c = d <= gate ? d : kFar;
          if (transpose)
            cost.at(j, i) = c;
          else
            cost.at(i, j) = c;
        }
      const std::vector<int> assign = hungarian(cost);
      for (std::size_t r = 0; r < assign.size(); ++r) {
        if (assign[r] < 0) continue;
        const std::size_t e = transpose ? static_cast<std::size_t>(assign[r]) : r;
        const std::size_t t = transpose ? r : static_cast<std::size_t>(assign[r]);
        const double d = dist2d(kept[e]->pos, truth[k][t].pos);
        if (d > gate) continue;
        ++matched;
        s.dist_sum += d;
        const std::uint64_t tid = truth[k][t].truth_id;
        auto it = last_track.find(tid);
        if (it != last_track.end() && it->second != kept[e]->track_id) ++s.ids;
        last_track[tid] = kept[e]->track_id;
      }
    }
    s.tp += matched;
    s.fp += ne - matched;
    s.fn += nt - matched;
  }
  return s;
}

}  // namespace

AssignmentResult solve_assignment(const Matrix& cost) {
  for (double v : cost.data)
    if (!std::isfinite(v)) throw InputError("assignment costs must be finite");
  AssignmentResult out;
  if (cost.rows == 0 || cost.cols == 0) {
    out.row_to_col.assign(cost.rows, -1);
    return out;
  }
  if (cost.rows <= cost.cols) {
    out.row_to_col = hungarian(cost);
  } else {
    Matrix t(cost.cols, cost.rows);
    for (std::size_t i = 0; i < cost.rows; ++i)
      for (std::size_t j = 0; j < cost.cols; ++j) t.at(j, i) = cost.at(i, j);
    const std::vector<int> col_to_row = hungarian(t);
    out.row_to_col.assign(cost.rows, -1);
    for (std::size_t j = 0; j < col_to_row.size(); ++j)
      if (col_to_row[j] >= 0)
        out.row_to_col[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
  }
  for (std::size_t i = 0; i < cost.rows; ++i)
    if (out.row_to_col[i] >= 0)
      out.cost += cost.at(i, static_cast<std::size_t>(out.row_to_col[i]));
  return out;
}

GospaStep gospa_step(const std::vector<std::array<double, 2>>& estimates,
                     const std::vector<std::array<double, 2>>& truth, double c, double p) {
  if (!(c > 0.0)) throw InputError("gospa cutoff must be positive");
  if (!(p >= 1.0)) throw InputError("gospa order must be at least one");
  const double cp = std::pow(c, p);
  const std::size_t ne = estimates.size(), nt = truth.size();
  GospaStep out;
  std::size_t matched = 0;
  if (ne > 0 && nt > 0) {
    const bool transpose = ne > nt;
    const std::size_t rows = transpose ? nt : ne;
    const std::size_t cols = transpose ? ne : nt;
    Matrix cost(rows, cols);
    for (std::size_t i = 0; i < ne; ++i)
      for (std::size_t j = 0; j < nt; ++j) {
        const double d = dist2d(estimates[i], truth[j]);
        const double v = std::min(std::pow(d, p), cp);
        if (transpose)
          cost.at(j, i) = v;
        else
          cost.at(i, j) = v;
      }
    const std::vector<int> assign = hungarian(cost);
    for (std::size_t r = 0; r < assign.size(); ++r) {
      if (assign[r] < 0) continue;
      const std::size_t e = transpose ? static_cast<std::size_t>(assign[r]) : r;
      const std::size_t t = transpose ? r : static_cast<std::size_t>(assign[r]);
      const double d = dist2d(estimates[e], truth[t]);
      // A pair at or beyond the cutoff costs the same as one miss plus one
      // false alarm, so it decomposes into cardinality terms.
      if (d < c) {
        out.localization += std::pow(d, p);
        ++matched;
      }
    }
  }
  out.missed = 0.5 * cp * static_cast<double>(nt - matched);
  out.false_alarm = 0.5 * cp * static_cast<double>(ne - matched);
  out.total = std::pow(out.localization + out.missed + out.false_alarm, 1.0 / p);
  return out;
}

GospaReport gospa(const std::vector<TrackFrame>& tracks,
                  const std::vector<TruthFrame>& truth, double c, double p) {
  if (tracks.size() != truth.size())
    throw SizeError("track and truth sequences must cover the same steps");
  GospaReport rep;
  rep.cutoff = c;
  rep.order = p;
  rep.per_step.reserve(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    std::vector<std::array<double, 2>> est, tru;
    est.reserve(tracks[k].size());
    tru.reserve(truth[k].size());
    for (const TrackPoint& t : tracks[k]) est.push_back(t.pos);
    for (const TruthPoint& t : truth[k]) tru.push_back(t.pos);
    rep.per_step.push_back(gospa_step(est, tru, c, p));
  }
  if (!rep.per_step.empty()) {
    for (const GospaStep& s : rep.per_step) {
      rep.mean.localization += s.localization;
      rep.mean.missed += s.missed;
      rep.mean.false_alarm += s.false_alarm;
      rep.mean.total += s.total;
    }
    const double n = static_cast<double>(rep.per_step.size());
    rep.mean.localization /= n;
    rep.mean.missed /= n;
    rep.mean.false_alarm /= n;
    rep.mean.total /= n;
  }
  return rep;
}

void AmotaConfig::validate() const {
  if (recall_levels <= 0) throw InputError("need at least one recall level");
  if (!(match_gate > 0.0)) throw InputError("match gate must be positive");
}

AmotaReport amota_simplified(const std::vector<TrackFrame>& tracks,
                             const std::vector<TruthFrame>& truth,
                             const AmotaConfig& cfg) {
  cfg.validate();
  if (tracks.size() != truth.size())
    throw SizeError("track and truth sequences must cover the same steps");
  std::size_t positives = 0;
  for (const TruthFrame& f : truth) positives += f.size();
  if (positives == 0) throw UndefinedMetric("amota needs at least one truth object");
  const double pd = static_cast<double>(positives);

  // Recall curve: outputs in descending score order, each greedily claiming
  // the nearest still-unclaimed truth object of its frame.
  struct Flat {
    std::size_t step, idx;
    double score;
  };
  std::vector<Flat> flat;
  for (std::size_t k = 0; k < tracks.size(); ++k)
    for (std::size_t i = 0; i < tracks[k].size(); ++i)
      flat.push_back({k, i, tracks[k][i].score});
  std::sort(flat.begin(), flat.end(), [](const Flat& a, const Flat& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.step != b.step) return a.step < b.step;
    return a.idx < b.idx;
  });
  std::vector<std::vector<char>> claimed(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) claimed[k].assign(truth[k].size(), 0);
  std::vector<std::size_t> cum_tp(flat.size(), 0);
  std::size_t running = 0;
  for (std::size_t n = 0; n < flat.size(); ++n) {
    const TrackPoint& t = tracks[flat[n].step][flat[n].idx];
    double best = cfg.match_gate;
    int best_j = -1;
    for (std::size_t j = 0; j < truth[flat[n].step].size(); ++j) {
      if (claimed[flat[n].step][j]) continue;
      const double d = dist2d(t.pos, truth[flat[n].step][j].pos);
      if (d <= best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0) {
      claimed[flat[n].step][static_cast<std::size_t>(best_j)] = 1;
      ++running;
    }
    cum_tp[n] = running;
  }

  AmotaReport rep;
  double motp_sum = 0.0;
  for (int k = 1; k <= cfg.recall_levels; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(cfg.recall_levels);
    rep.recall_levels.push_back(r);
    std::size_t cut = flat.size();
    for (std::size_t n = 0; n < flat.size(); ++n) {
      if (static_cast<double>(cum_tp[n]) / pd >= r) {
        cut = n;
        break;
      }
    }
    if (cut == flat.size()) {
      rep.motar.push_back(0.0);
      motp_sum += cfg.match_gate;
      continue;
    }
    const ThresholdStats s = stats_at_threshold(tracks, truth, cfg.match_gate,
                                                flat[cut].score);
    const double raw = 1.0 -
                       (static_cast<double>(s.ids) + static_cast<double>(s.fp) +
                        static_cast<double>(s.fn) - (1.0 - r) * pd) /
                           (r * pd);
    rep.motar.push_back(std::clamp(raw, 0.0, 1.0));
    motp_sum += s.tp > 0 ? s.dist_sum / static_cast<double>(s.tp) : cfg.match_gate;
  }
  rep.amota = std::accumulate(rep.motar.begin(), rep.motar.end(), 0.0) /
              static_cast<double>(cfg.recall_levels);
  rep.amotp = motp_sum / static_cast<double>(cfg.recall_levels);
  return rep;
}

std::size_t count_id_switches(const std::vector<TrackFrame>& tracks,
                              const std::vector<TruthFrame>& truth, double gate) {
  if (tracks.size() != truth.size())
    throw SizeError("track and truth sequences must cover the same steps");
  return stats_at_threshold(tracks, truth, gate, -kInf).ids;
}

MetricReport evaluate_tracking(const std::vector<TrackFrame>& tracks,
                               const std::vector<TruthFrame>& truth, double gospa_c,
                               double gospa_p, const AmotaConfig& cfg) {
  MetricReport rep;
  rep.gospa = gospa(tracks, truth, gospa_c, gospa_p);
  const AmotaReport a = amota_simplified(tracks, truth, cfg);
  rep.amota = a.amota;
  rep.amotp = a.amotp;
  rep.id_switches = count_id_switches(tracks, truth, cfg.match_gate);
  return rep;
}

std::vector<TruthFrame> truth_frames(const Scenario& scenario) {
  std::vector<TruthFrame> out(static_cast<std::size_t>(scenario.cfg.duration));
  for (const Trajectory& t : scenario.trajectories) {
    for (int k = t.birth_step; k < t.death_step; ++k) {
      const KinematicState& x = t.state_at(k);
      out[static_cast<std::size_t>(k)].push_back({t.truth_id, {x.pos[0], x.pos[1]}});
    }
  }
  return out;
}

}  // namespace nebp
