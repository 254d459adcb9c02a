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
#include "viplab/trajstore.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "viplab/errors.h"

namespace viplab {

static_assert(std::endian::native == std::endian::little,
              "dataset I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'I', 'P', 'D', 'A', 'T', 'A', '1'};

void round_matrix(Matrix& m) {
  for (double& v : m.data) v = static_cast<double>(static_cast<float>(v));
}

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_floats(std::string& out, const Matrix& m) {
  for (double v : m.data) put(out, static_cast<float>(v));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  template <typename T>
  T get() {
    if (pos + sizeof(T) > bytes.size()) {
      throw FormatError(FormatErrorCode::kTruncated, "unexpected end of file");
    }
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }

  Matrix floats(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = static_cast<double>(get<float>());
    return m;
  }
};

// Picks a trajectory other than `exclude` uniformly.
std::size_t other_trajectory(std::size_t n, std::size_t exclude, Rng& rng) {
  std::size_t j = uniform_index(rng, 0, n - 2);
  return j >= exclude ? j + 1 : j;
}

void check_lengths(const TrajectoryDataset& d, std::size_t min_len,
                   const char* who) {
  if (d.empty()) throw std::invalid_argument(std::string(who) + ": empty dataset");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].length() < min_len) {
      throw std::invalid_argument(std::string(who) + ": trajectory " +
                                  std::to_string(i) + " has length " +
                                  std::to_string(d[i].length()));
    }
  }
}

}  // namespace

void Trajectory::validate() const {
  if (frames.rows < 2) {
    throw std::invalid_argument("trajectory needs >= 2 frames, has " +
                                std::to_string(frames.rows));
  }
  if (has_actions() && actions.rows + 1 != frames.rows) {
    throw std::invalid_argument("trajectory has " + std::to_string(frames.rows) +
                                " frames but " + std::to_string(actions.rows) +
                                " actions");
  }
  if (has_states() && states.rows != frames.rows) {
    throw std::invalid_argument("trajectory has " + std::to_string(frames.rows) +
                                " frames but " + std::to_string(states.rows) +
                                " states");
  }
}

void Trajectory::round_to_storage() {
  round_matrix(frames);
  round_matrix(actions);
  round_matrix(states);
}

TrajectoryDataset::TrajectoryDataset(std::vector<Trajectory> trajectories,
                                     nlohmann::json manifest)
    : manifest_(std::move(manifest)) {
  for (auto& t : trajectories) add(std::move(t));
}

void TrajectoryDataset::add(Trajectory trajectory) {
  trajectory.validate();
  if (!trajectories_.empty() && trajectory.frames.cols != obs_dim()) {
    throw std::invalid_argument(
        "dataset observation dim is " + std::to_string(obs_dim()) +
        ", trajectory has " + std::to_string(trajectory.frames.cols));
  }
  trajectories_.push_back(std::move(trajectory));
}

std::size_t TrajectoryDataset::obs_dim() const {
  return trajectories_.empty() ? 0 : trajectories_.front().frames.cols;
}

std::size_t TrajectoryDataset::num_transitions() const {
  std::size_t n = 0;
  for (const auto& t : trajectories_) n += t.length() - 1;
  return n;
}

void TrajectoryDataset::round_to_storage() {
  for (auto& t : trajectories_) t.round_to_storage();
}

// --- persistence -------------------------------------------------------------

void save_dataset(const TrajectoryDataset& dataset,
                  const std::filesystem::path& path) {
  if (dataset.empty()) {
    throw FormatError(FormatErrorCode::kEmpty, "refusing to save " + path.string());
  }
  std::string out(kMagic, sizeof(kMagic));
  put(out, static_cast<std::uint32_t>(dataset.size()));
  for (const auto& t : dataset.trajectories()) {
    put(out, static_cast<std::uint32_t>(t.frames.rows));
    put(out, static_cast<std::uint32_t>(t.frames.cols));
    put(out, static_cast<std::uint32_t>(t.has_actions() ? t.actions.cols : 0));
    put(out, static_cast<std::uint32_t>(t.has_states() ? t.states.cols : 0));
  }
  for (const auto& t : dataset.trajectories()) {
    put_floats(out, t.frames);
    put_floats(out, t.actions);
    put_floats(out, t.states);
  }
  const auto trailer_offset = static_cast<std::uint64_t>(out.size());
  nlohmann::json trailer;
  trailer["manifest"] = dataset.manifest();
  trailer["metadata"] = nlohmann::json::array();
  for (const auto& t : dataset.trajectories()) {
    trailer["metadata"].push_back(t.metadata);
  }
  out += trailer.dump();
  put(out, trailer_offset);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError(FormatErrorCode::kIo, "write failed: " + path.string());
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(FormatErrorCode::kBadMagic, path.string());
  }
  Reader r{bytes, sizeof(kMagic)};
  const auto n = r.get<std::uint32_t>();
  if (n == 0) throw FormatError(FormatErrorCode::kEmpty, path.string());
  struct Dims {
    std::uint32_t t, d, a, s;
  };
  std::vector<Dims> dims(n);
  std::uint64_t floats = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dm = dims[i];
    dm = {r.get<std::uint32_t>(), r.get<std::uint32_t>(),
          r.get<std::uint32_t>(), r.get<std::uint32_t>()};
    if (dm.t < 2) {
      // Same wording as the analysis error, so a one-frame file reads the
      // same whichever layer rejects it.
      throw FormatError(FormatErrorCode::kCountMismatch,
                        "trajectory " + std::to_string(i) + " has " +
                            std::to_string(dm.t) +
                            " frame(s), need >= 2: curve too short");
    }
    floats += std::uint64_t{dm.t} * dm.d + std::uint64_t{dm.t - 1} * dm.a +
              std::uint64_t{dm.t} * dm.s;
  }
  const std::uint64_t blob_end = r.pos + floats * sizeof(float);
  if (bytes.size() < blob_end + sizeof(std::uint64_t)) {
    throw FormatError(FormatErrorCode::kTruncated,
                      "file has " + std::to_string(bytes.size()) +
                          " bytes, blobs end at " + std::to_string(blob_end));
  }
  std::uint64_t trailer_offset = 0;
  std::memcpy(&trailer_offset, bytes.data() + bytes.size() - sizeof(trailer_offset),
              sizeof(trailer_offset));
  if (trailer_offset != blob_end) {
    throw FormatError(FormatErrorCode::kCountMismatch,
                      "trailer at " + std::to_string(trailer_offset) +
                          ", counts imply " + std::to_string(blob_end));
  }
  std::vector<Trajectory> trajs(n);
  for (std::size_t i = 0; i < n; ++i) {
    trajs[i].frames = r.floats(dims[i].t, dims[i].d);
    if (dims[i].a) trajs[i].actions = r.floats(dims[i].t - 1, dims[i].a);
    if (dims[i].s) trajs[i].states = r.floats(dims[i].t, dims[i].s);
  }
  nlohmann::json trailer;
  try {
    trailer = nlohmann::json::parse(
        bytes.substr(blob_end, bytes.size() - sizeof(std::uint64_t) - blob_end));
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, e.what());
  }
  const auto& meta = trailer.at("metadata");
  if (meta.size() != n) {
    throw FormatError(FormatErrorCode::kCountMismatch,
                      std::to_string(meta.size()) + " metadata entries for " +
                          std::to_string(n) + " trajectories");
  }
  for (std::size_t i = 0; i < n; ++i) trajs[i].metadata = meta[i];
  try {
    return TrajectoryDataset(std::move(trajs), trailer.at("manifest"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrorCode::kCountMismatch, e.what());
  }
}

// --- samplers ----------------------------------------------------------------

VipBatch sample_vip_batch(const TrajectoryDataset& dataset,
                          const VipSamplerOptions& options, Rng& rng) {
  check_lengths(dataset, 2, "sample_vip_batch");
  if (options.batch_size < 1) {
    throw std::invalid_argument("sample_vip_batch: batch size must be >= 1");
  }
  if (options.num_negatives > 0 && dataset.size() < 2) {
    throw std::invalid_argument(
        "sample_vip_batch: negatives need >= 2 trajectories");
  }
  if (options.goal_selfloop < 0.0 || options.goal_selfloop > 1.0) {
    throw std::invalid_argument("sample_vip_batch: goal_selfloop not in [0,1]");
  }
  VipBatch batch;
  batch.dataset = &dataset;
  batch.elements.resize(options.batch_size);
  for (auto& e : batch.elements) {
    e.traj = uniform_index(rng, 0, dataset.size() - 1);
    const std::size_t h = dataset[e.traj].length();
    e.start = uniform_index(rng, 0, h - 2);
    e.goal = uniform_index(rng, e.start + 1, h - 1);
    e.mid = uniform_index(rng, e.start, e.goal - 1);
    if (options.goal_selfloop > 0.0 &&
        std::bernoulli_distribution(options.goal_selfloop)(rng)) {
      e.mid = e.goal;
      e.goal_flag = true;
    }
    for (std::size_t j = 0; j < options.num_negatives; ++j) {
      FramePair p;
      p.traj = other_trajectory(dataset.size(), e.traj, rng);
      p.index = uniform_index(rng, 0, dataset[p.traj].length() - 2);
      e.negatives.push_back(p);
    }
  }
  return batch;
}

TcnBatch sample_tcn_triplets(const TrajectoryDataset& dataset,
                             const TcnSamplerOptions& options, Rng& rng) {
  if (dataset.empty()) {
    throw std::invalid_argument("sample_tcn_triplets: empty dataset");
  }
  if (options.window < 1 || options.batch_size < 1) {
    throw std::invalid_argument("sample_tcn_triplets: window and batch must be >= 1");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].length() >= 3) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw std::invalid_argument(
        "sample_tcn_triplets: no trajectory has >= 3 frames");
  }
  if (options.num_negatives > 0 && dataset.size() < 2) {
    throw std::invalid_argument(
        "sample_tcn_triplets: negatives need >= 2 trajectories");
  }
  TcnBatch batch;
  batch.dataset = &dataset;
  batch.triplets.resize(options.batch_size);
  for (auto& tr : batch.triplets) {
    // Uniform over eligible trajectories == rejection of short ones.
    tr.traj = eligible[uniform_index(rng, 0, eligible.size() - 1)];
    const std::size_t h = dataset[tr.traj].length();
    tr.anchor = uniform_index(rng, 0, h - 3);
    const std::size_t k = uniform_index(rng, 1, options.window);
    tr.positive = std::min(tr.anchor + k, h - 2);
    tr.negative = uniform_index(rng, tr.positive + 1, h - 1);
    for (std::size_t j = 0; j < options.num_negatives; ++j) {
      FramePair p;
      p.traj = other_trajectory(dataset.size(), tr.traj, rng);
      p.index = uniform_index(rng, 0, dataset[p.traj].length() - 1);
      tr.cross_negatives.push_back(p);
    }
  }
  return batch;
}

LstdBatch sample_lstd_tuples(const TrajectoryDataset& dataset,
                             std::size_t batch_size, Rng& rng,
                             double goal_selfloop) {
  VipSamplerOptions o;
  o.batch_size = batch_size;
  o.num_negatives = 0;
  o.goal_selfloop = goal_selfloop;
  const VipBatch vb = sample_vip_batch(dataset, o, rng);
  LstdBatch batch;
  batch.dataset = &dataset;
  for (const auto& e : vb.elements) {
    batch.tuples.push_back({e.traj, e.mid, e.mid_next(), e.goal, e.goal_flag});
  }
  return batch;
}

}  // namespace viplab
