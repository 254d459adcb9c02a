// Copyright 2026 The viplab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "viplab/analysis.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "viplab/errors.h"

namespace viplab {

namespace {

std::vector<double> distances_to(const Matrix& emb, std::size_t frames,
                                 std::span<const double> goal) {
  std::vector<double> d(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < goal.size(); ++k) {
      const double diff = emb(t, k) - goal[k];
      s += diff * diff;
    }
    d[t] = std::sqrt(s);
  }
  return d;
}

void normalize_curve(DistanceCurve& c, bool normalize) {
  c.degenerate = !(c.values.front() > 0.0);
  if (normalize && !c.degenerate) {
    const double d0 = c.values.front();
    for (double& v : c.values) v /= d0;
    c.normalized = true;
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  out << std::setprecision(17);
  return out;
}

}  // namespace

DistanceCurve distance_curve(const Encoder& encoder,
                             const Trajectory& trajectory,
                             const GoalSpec& goal, bool normalize,
                             std::size_t traj_id) {
  const Matrix emb = encoder.embed_batch(trajectory.frames, Exec::kSerial);
  DistanceCurve c;
  c.traj_id = traj_id;
  c.values = distances_to(emb, trajectory.length(), goal.embedding());
  normalize_curve(c, normalize);
  return c;
}

DistanceCurve distance_curve_to_last(const Encoder& encoder,
                                     const Trajectory& trajectory,
                                     std::size_t frames, bool normalize,
                                     std::size_t traj_id) {
  if (frames < 1 || frames > trajectory.length()) {
    throw std::invalid_argument("distance curve: bad frame count " +
                                std::to_string(frames));
  }
  Matrix kept(frames, trajectory.frames.cols);
  std::copy_n(trajectory.frames.data.begin(), frames * trajectory.frames.cols,
              kept.data.begin());
  const Matrix emb = encoder.embed_batch(kept, Exec::kSerial);
  DistanceCurve c;
  c.traj_id = traj_id;
  c.values = distances_to(emb, frames, emb.row(frames - 1));
  normalize_curve(c, normalize);
  return c;
}

double bump_fraction(std::span<const double> curve) {
  if (curve.size() < 2) throw std::invalid_argument("curve too short");
  std::size_t bumps = 0;
  for (std::size_t t = 0; t + 1 < curve.size(); ++t) {
    if (curve[t + 1] > curve[t]) ++bumps;
  }
  return static_cast<double>(bumps) / static_cast<double>(curve.size() - 1);
}

double non_increasing_fraction(std::span<const double> curve) {
  if (curve.size() < 2) throw std::invalid_argument("curve too short");
  std::size_t flat = 0;
  for (std::size_t t = 0; t + 1 < curve.size(); ++t) {
    if (curve[t + 1] <= curve[t]) ++flat;
  }
  return static_cast<double>(flat) / static_cast<double>(curve.size() - 1);
}

BumpReport dataset_bump_report(const Encoder& encoder,
                               const TrajectoryDataset& dataset,
                               std::size_t frame_cap, Exec exec) {
  const std::size_t n = dataset.size();
  // status 1: too short, 2: degenerate.
  std::vector<double> result(n, 0.0);
  std::vector<int> status(n, 0);
  auto one = [&](std::size_t i) {
    const Trajectory& traj = dataset[i];
    if (frame_cap > 0 && traj.length() < frame_cap) {
      status[i] = 1;
      return;
    }
    const std::size_t frames = frame_cap > 0 ? frame_cap : traj.length();
    const DistanceCurve c = distance_curve_to_last(encoder, traj, frames, false, i);
    if (c.degenerate) {
      status[i] = 2;
      return;
    }
    result[i] = bump_fraction(c.values);
  };
  const auto count = static_cast<std::int64_t>(n);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  } else {
    for (std::int64_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }

  BumpReport r;
  for (std::size_t i = 0; i < n; ++i) {
    if (status[i] == 1) {
      r.skipped_short.push_back(i);
    } else if (status[i] == 2) {
      r.degenerate.push_back(i);
    } else {
      r.traj_ids.push_back(i);
      r.fractions.push_back(result[i]);
    }
  }
  if (r.fractions.empty()) {
    throw std::invalid_argument(
        "bump report: no trajectory with at least " +
        std::to_string(frame_cap) + " frames and a nonzero initial distance");
  }
  // Sorted summation keeps the statistics independent of trajectory order.
  std::vector<double> sorted = r.fractions;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double f : sorted) sum += f;
  r.mean = sum / static_cast<double>(sorted.size());
  double ss = 0.0;
  for (double f : sorted) ss += (f - r.mean) * (f - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(sorted.size()));
  return r;
}

std::vector<double> normalized_rewards(const Encoder& encoder,
                                       const TrajectoryDataset& dataset) {
  std::vector<double> rewards;
  for (const Trajectory& traj : dataset.trajectories()) {
    const Matrix emb = encoder.embed_batch(traj.frames, Exec::kSerial);
    const auto d = distances_to(emb, traj.length(), emb.row(traj.length() - 1));
    const double scale = d.front() > 0.0 ? d.front() : 1.0;
    for (std::size_t t = 0; t + 1 < d.size(); ++t) {
      rewards.push_back((d[t] - d[t + 1]) / scale);
    }
  }
  return rewards;
}

HistogramReport reward_histogram(std::span<const Encoder* const> encoders,
                                 const TrajectoryDataset& dataset,
                                 const HistogramOptions& options) {
  if (encoders.empty() || encoders.size() > 2) {
    throw std::invalid_argument("histogram: needs one or two encoders");
  }
  if (options.bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  std::vector<std::vector<double>> rewards;
  for (const Encoder* e : encoders) rewards.push_back(normalized_rewards(*e, dataset));

  double half = 0.0;
  if (options.range) {
    half = *options.range;
    if (!(half > 0.0)) throw std::invalid_argument("histogram: range must be > 0");
  } else {
    for (const auto& rs : rewards) {
      for (double r : rs) half = std::max(half, std::abs(r));
    }
    if (!(half > 0.0)) half = 1.0;
  }

  HistogramReport h;
  const std::size_t bins = options.bins;
  const double width = 2.0 * half / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges.push_back(-half + width * static_cast<double>(b));
  }
  h.edges.back() = half;
  auto fill = [&](const std::vector<double>& rs) {
    std::vector<std::size_t> counts(bins, 0);
    for (double r : rs) {
      const double pos = std::floor((r + half) / width);
      const auto b = static_cast<std::size_t>(
          std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
      ++counts[b];
    }
    return counts;
  };
  h.counts_a = fill(rewards[0]);
  if (rewards.size() == 2) {
    h.counts_b = fill(rewards[1]);
    h.ratio.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      if (h.counts_b[b] > 0) {
        const double a = static_cast<double>(h.counts_a[b]);
        const double c = static_cast<double>(h.counts_b[b]);
        h.ratio[b] = (a - c) / c;
      } else {
        ++h.undefined_ratios;
      }
    }
  }
  return h;
}

CorrelationReport reward_correlation(std::span<const double> embedding_rewards,
                                     std::span<const double> true_rewards) {
  if (embedding_rewards.size() != true_rewards.size()) {
    throw std::invalid_argument("correlation: " +
                                std::to_string(embedding_rewards.size()) +
                                " embedding rewards vs " +
                                std::to_string(true_rewards.size()) +
                                " true rewards");
  }
  if (embedding_rewards.size() < 2) {
    throw std::invalid_argument("correlation: need at least 2 samples");
  }
  CorrelationReport r;
  r.embedding_rewards.assign(embedding_rewards.begin(), embedding_rewards.end());
  r.true_rewards.assign(true_rewards.begin(), true_rewards.end());
  const auto n = static_cast<double>(r.n());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < r.n(); ++i) {
    mx += r.embedding_rewards[i];
    my += r.true_rewards[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < r.n(); ++i) {
    const double dx = r.embedding_rewards[i] - mx;
    const double dy = r.true_rewards[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) {
    r.degenerate = true;
    r.intercept = my;
    return r;
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return r;
}

CorrelationReport reward_correlation(std::span<const EpisodeResult> episodes) {
  std::vector<double> emb, truth;
  for (const auto& e : episodes) {
    const auto a = e.embedding_rewards();
    const auto b = e.true_rewards();
    emb.insert(emb.end(), a.begin(), a.end());
    truth.insert(truth.end(), b.begin(), b.end());
  }
  return reward_correlation(emb, truth);
}

double prop2_check(const Encoder& encoder, const TrajectoryDataset& paths,
                   Exec exec) {
  const std::size_t n = paths.size();
  std::vector<std::size_t> good(n, 0), steps(n, 0);
  auto one = [&](std::size_t i) {
    const Trajectory& traj = paths[i];
    const DistanceCurve c =
        distance_curve_to_last(encoder, traj, traj.length(), false, i);
    for (std::size_t t = 0; t + 1 < c.values.size(); ++t) {
      if (c.values[t + 1] < c.values[t]) ++good[i];
    }
    steps[i] = c.values.size() - 1;
  };
  const auto count = static_cast<std::int64_t>(n);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  } else {
    for (std::int64_t i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }
  std::size_t g = 0, s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g += good[i];
    s += steps[i];
  }
  return s == 0 ? 0.0 : static_cast<double>(g) / static_cast<double>(s);
}

void write_curves_csv(std::span<const DistanceCurve> curves,
                      const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "traj_id,step,distance\n";
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < c.values.size(); ++t) {
      out << c.traj_id << ',' << t << ',' << c.values[t] << '\n';
    }
  }
}

void write_bumps_csv(const BumpReport& report,
                     const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "traj_id,bump_fraction\n";
  for (std::size_t i = 0; i < report.fractions.size(); ++i) {
    out << report.traj_ids[i] << ',' << report.fractions[i] << '\n';
  }
  out << "mean," << report.mean << '\n';
  out << "std," << report.stddev << '\n';
}

void write_histogram_csv(const HistogramReport& report,
                         const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "bin_lo,bin_hi,count_a,count_b,ratio\n";
  for (std::size_t b = 0; b < report.counts_a.size(); ++b) {
    out << report.edges[b] << ',' << report.edges[b + 1] << ','
        << report.counts_a[b] << ',';
    if (!report.counts_b.empty()) out << report.counts_b[b];
    out << ',';
    if (!report.ratio.empty() && report.ratio[b]) out << *report.ratio[b];
    out << '\n';
  }
}

void write_correlation_csv(const CorrelationReport& report,
                           const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "embedding_reward,true_reward\n";
  for (std::size_t i = 0; i < report.n(); ++i) {
    out << report.embedding_rewards[i] << ',' << report.true_rewards[i] << '\n';
  }
}

nlohmann::json correlation_summary(const CorrelationReport& report) {
  return {{"r2", report.r2},
          {"slope", report.slope},
          {"intercept", report.intercept},
          {"n", report.n()},
          {"degenerate", report.degenerate}};
}

}  // namespace viplab
