#include "pvst/training.hpp"

#include "pvst/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pvst {

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("train: epochs must be non-negative");
  if (c.batch_size < 1) throw ConfigError("train: batch size must be positive");
  if (c.views_per_cloud < 1) throw ConfigError("train: views per cloud must be positive");
  if (!(c.learning_rate > 0)) throw ConfigError("train: learning rate must be positive");
  if (c.image_size != 64 && c.image_size != 128 && c.image_size != 256)
    throw ConfigError("train: image size must be 64, 128, or 256");
  if (c.weights.vis < 0 || c.weights.depth < 0 || c.weights.sil < 0 || c.weights.cont < 0)
    throw ConfigError("train: loss weights must be non-negative");
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

std::string dims_to_csv(const ModelDims& d) {
  std::ostringstream os;
  os << d.backbone_h1 << "," << d.backbone_h2 << "," << d.point_feat << ","
     << d.global_feat << "," << d.view_h << "," << d.view_feat << "," << d.fuse_feat
     << "," << d.score_h1 << "," << d.score_h2 << "," << d.codeword << ","
     << d.reshape_ch << "," << d.reshape_hw << "," << d.stem << "," << d.res1 << ","
     << d.res2 << "," << d.mid << "," << d.out_c1 << "," << d.out_c2 << ","
     << d.image_size;
  return os.str();
}

ModelDims dims_from_csv(const std::string& csv) {
  std::vector<int> v;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) v.push_back(std::stoi(tok));
  if (v.size() != 19) throw FormatError("checkpoint: malformed dims echo");
  ModelDims d;
  int i = 0;
  d.backbone_h1 = v[i++];
  d.backbone_h2 = v[i++];
  d.point_feat = v[i++];
  d.global_feat = v[i++];
  d.view_h = v[i++];
  d.view_feat = v[i++];
  d.fuse_feat = v[i++];
  d.score_h1 = v[i++];
  d.score_h2 = v[i++];
  d.codeword = v[i++];
  d.reshape_ch = v[i++];
  d.reshape_hw = v[i++];
  d.stem = v[i++];
  d.res1 = v[i++];
  d.res2 = v[i++];
  d.mid = v[i++];
  d.out_c1 = v[i++];
  d.out_c2 = v[i++];
  d.image_size = v[i++];
  return d;
}

std::string config_echo(const TrainConfig& c) {
  char buf[64];
  std::ostringstream os;
  os << "epochs=" << c.epochs << "\n";
  os << "batch_size=" << c.batch_size << "\n";
  os << "views_per_cloud=" << c.views_per_cloud << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", c.learning_rate);
  os << "learning_rate=" << buf << "\n";
  os << "seed=" << c.seed << "\n";
  os << "image_size=" << c.image_size << "\n";
  os << "variant=" << to_string(c.variant) << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g", c.weights.vis,
                c.weights.depth, c.weights.sil, c.weights.cont);
  os << "weights=" << buf << "\n";
  os << "dims=" << dims_to_csv(c.dims) << "\n";
  return os.str();
}

TrainConfig config_from_echo(const std::string& echo) {
  TrainConfig c;
  std::istringstream is(echo);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "epochs") c.epochs = std::stoi(val);
    else if (key == "batch_size") c.batch_size = std::stoi(val);
    else if (key == "views_per_cloud") c.views_per_cloud = std::stoi(val);
    else if (key == "learning_rate") c.learning_rate = std::strtod(val.c_str(), nullptr);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "image_size") c.image_size = std::stoi(val);
    else if (key == "variant") c.variant = pooling_variant_from_name(val);
    else if (key == "weights") {
      std::istringstream ws(val);
      ws >> c.weights.vis >> c.weights.depth >> c.weights.sil >> c.weights.cont;
    } else if (key == "dims") {
      c.dims = dims_from_csv(val);
    }
  }
  return c;
}

void put_u32(std::ostream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::ostream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), 8);
}
void put_string(std::ostream& f, const std::string& s) {
  put_u64(f, s.size());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& f, const char* what) {
  std::uint32_t v;
  f.read(reinterpret_cast<char*>(&v), 4);
  if (!f) throw FormatError(std::string("checkpoint: truncated ") + what);
  return v;
}
std::uint64_t get_u64(std::istream& f, const char* what) {
  std::uint64_t v;
  f.read(reinterpret_cast<char*>(&v), 8);
  if (!f) throw FormatError(std::string("checkpoint: truncated ") + what);
  return v;
}
std::string get_string(std::istream& f, const char* what) {
  const std::uint64_t n = get_u64(f, what);
  if (n > (1ULL << 30)) throw FormatError(std::string("checkpoint: oversized ") + what);
  std::string s(n, '\0');
  f.read(s.data(), static_cast<std::streamsize>(n));
  if (!f) throw FormatError(std::string("checkpoint: truncated ") + what);
  return s;
}

void put_tensor_table(std::ostream& f,
                      const std::vector<std::pair<std::string, const Vec*>>& table,
                      const std::map<std::string, Shape>& shapes) {
  put_u64(f, table.size());
  for (const auto& [name, data] : table) {
    put_string(f, name);
    const Shape& shape = shapes.at(name);
    put_u32(f, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) put_u64(f, static_cast<std::uint64_t>(d));
    f.write(reinterpret_cast<const char*>(data->data()),
            static_cast<std::streamsize>(data->size() * sizeof(Scalar)));
  }
}

std::vector<std::pair<std::string, Tensor>> get_tensor_table(std::istream& f) {
  const std::uint64_t count = get_u64(f, "tensor table");
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = get_string(f, "tensor name");
    const std::uint32_t rank = get_u32(f, "tensor rank");
    if (rank > 8) throw FormatError("checkpoint: implausible tensor rank");
    Shape shape;
    long total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = static_cast<long>(get_u64(f, "tensor dim"));
      if (d <= 0 || d > (1L << 32)) throw FormatError("checkpoint: bad tensor extent");
      shape.push_back(static_cast<int>(d));
      total *= d;
    }
    Vec data(total);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(total * sizeof(Scalar)));
    if (!f) throw FormatError("checkpoint: truncated tensor data");
    out.emplace_back(name, Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write("PVST", 4);
  put_u32(f, kCheckpointVersion);
  put_string(f, config_echo(ckpt.config));
  put_u64(f, static_cast<std::uint64_t>(ckpt.epochs_done));
  for (std::uint64_t w : ckpt.rng_state) put_u64(f, w);

  std::map<std::string, Shape> shapes;
  std::vector<std::pair<std::string, const Vec*>> params, ms, ss;
  long adam_t = 0;
  for (const auto& name : ckpt.params.order) {
    const Tensor& t = ckpt.params.at(name);
    shapes[name] = t.shape();
    params.emplace_back(name, &t.data());
    const auto it = ckpt.adam.find(name);
    if (it == ckpt.adam.end())
      throw ContractError("save_checkpoint: missing optimizer state for " + name);
    ms.emplace_back(name, &it->second.m);
    ss.emplace_back(name, &it->second.s);
    adam_t = it->second.t;
  }
  put_u64(f, static_cast<std::uint64_t>(adam_t));
  put_tensor_table(f, params, shapes);
  put_tensor_table(f, ms, shapes);
  put_tensor_table(f, ss, shapes);
  if (!f) throw IoError("save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "PVST", 4) != 0)
    throw FormatError("load_checkpoint: bad magic in " + path);
  const std::uint32_t version = get_u32(f, "version");
  if (version != kCheckpointVersion)
    throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config = config_from_echo(get_string(f, "config"));
  ckpt.epochs_done = static_cast<long>(get_u64(f, "epoch counter"));
  for (auto& w : ckpt.rng_state) w = get_u64(f, "rng state");
  const long adam_t = static_cast<long>(get_u64(f, "adam step"));

  ckpt.params.dims = ckpt.config.dims;
  for (auto& [name, tensor] : get_tensor_table(f)) {
    ckpt.params.order.push_back(name);
    ckpt.params.tensors.emplace(name, std::move(tensor));
  }
  for (auto& [name, tensor] : get_tensor_table(f)) {
    AdamState st;
    st.m = tensor.data();
    st.t = adam_t;
    st.lr = ckpt.config.learning_rate;
    ckpt.adam.emplace(name, std::move(st));
  }
  for (auto& [name, tensor] : get_tensor_table(f)) {
    auto it = ckpt.adam.find(name);
    if (it == ckpt.adam.end())
      throw FormatError("load_checkpoint: second-moment table mismatch for " + name);
    it->second.s = tensor.data();
  }
  for (const auto& name : ckpt.params.order) {
    const auto it = ckpt.adam.find(name);
    if (it == ckpt.adam.end() || it->second.m.size() != ckpt.params.at(name).size() ||
        it->second.s.size() != ckpt.params.at(name).size())
      throw FormatError("load_checkpoint: optimizer state mismatch for " + name);
  }
  return ckpt;
}

void validate_architecture(const Checkpoint& ckpt, const ModelDims& dims) {
  const PretextParams expected = init_params(dims, 0);
  if (expected.order.size() != ckpt.params.order.size())
    throw ArchitectureMismatchError(
        "checkpoint: parameter group count " + std::to_string(ckpt.params.order.size()) +
        " vs expected " + std::to_string(expected.order.size()));
  for (const auto& name : expected.order) {
    const auto it = ckpt.params.tensors.find(name);
    if (it == ckpt.params.tensors.end())
      throw ArchitectureMismatchError("checkpoint: missing parameter group " + name);
    if (it->second.shape() != expected.at(name).shape())
      throw ArchitectureMismatchError("checkpoint: shape " +
                                      shape_str(it->second.shape()) + " for " + name +
                                      " vs expected " +
                                      shape_str(expected.at(name).shape()));
  }
}

// ---------------------------------------------------------------------------
// Training loop

void append_loss_log(const std::string& path, int epoch, const EpochLoss& loss) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("loss log: cannot open " + path);
  char line[160];
  std::snprintf(line, sizeof(line), "%d %.6f %.6f %.6f %.6f %.6f\n", epoch, loss.total,
                loss.vis, loss.depth, loss.sil, loss.cont);
  f << line;
}

TrainResult pretrain(const DatasetManifest& manifest, const std::string& data_dir,
                     const RenderCache& cache, const std::string& cache_dir,
                     const TrainConfig& config, const Checkpoint* resume,
                     const EpochHook& hook) {
  validate(config);
  if (manifest.entries.empty()) throw ConfigError("pretrain: empty dataset");
  if (config.views_per_cloud > cache.views_per_cloud)
    throw ConfigError("pretrain: cache holds " + std::to_string(cache.views_per_cloud) +
                      " views per cloud, need " + std::to_string(config.views_per_cloud));

  ModelDims dims = config.dims;
  dims.image_size = config.image_size;
  TrainConfig echo = config;
  echo.dims = dims;

  // Clouds in manifest order; render-target lookup by (id, view index).
  const int n_clouds = static_cast<int>(manifest.entries.size());
  std::vector<Points> clouds(static_cast<size_t>(n_clouds));
  std::map<std::pair<std::string, int>, const RenderCacheEntry*> targets;
  for (const auto& e : cache.entries) targets[{e.id, e.view_index}] = &e;
  for (int i = 0; i < n_clouds; ++i) {
    const auto& me = manifest.entries[static_cast<size_t>(i)];
    clouds[static_cast<size_t>(i)] = load_xyz(data_dir + "/" + me.path);
    for (int k = 0; k < config.views_per_cloud; ++k)
      if (targets.find({me.id, k}) == targets.end())
        throw IoError("pretrain: missing render target for " + me.id + " view " +
                      std::to_string(k));
  }

  if (!config.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw IoError("pretrain: cannot create " + config.out_dir);
  }

  TrainResult result;
  PretextParams params;
  std::map<std::string, AdamState> adam;
  Rng rng(0);
  int epoch_start = 0;

  if (resume != nullptr) {
    validate_architecture(*resume, dims);
    params = resume->params;
    params.dims = dims;
    adam = resume->adam;
    for (auto& [name, st] : adam) st.lr = config.learning_rate;
    rng.set_state(resume->rng_state);
    epoch_start = static_cast<int>(resume->epochs_done);
  } else {
    params = init_params(dims, Rng::mix(config.seed, 0x696e6974ULL));
    for (const auto& name : params.order)
      adam.emplace(name, AdamState(params.at(name).size(), config.learning_rate));
    rng.reseed(Rng::mix(config.seed, 0x6c6f6f70ULL));
  }

  std::map<std::string, Vec> grad_acc;
  for (const auto& name : params.order)
    grad_acc.emplace(name, Vec::Zero(params.at(name).size()));

  result.checkpoint.epochs_done = epoch_start;
  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = epoch_start; epoch < config.epochs; ++epoch) {
    // Per-epoch view permutations, then one shuffled round per view slot.
    std::vector<std::vector<int>> view_perm(static_cast<size_t>(n_clouds));
    for (int i = 0; i < n_clouds; ++i)
      view_perm[static_cast<size_t>(i)] = rng.permutation(config.views_per_cloud);
    std::vector<std::pair<int, int>> samples;  // (cloud index, view index)
    samples.reserve(static_cast<size_t>(n_clouds) * config.views_per_cloud);
    for (int round = 0; round < config.views_per_cloud; ++round) {
      const std::vector<int> order = rng.permutation(n_clouds);
      for (int c : order)
        samples.emplace_back(c, view_perm[static_cast<size_t>(c)][static_cast<size_t>(round)]);
    }

    EpochLoss sums;
    long step = 0;
    for (size_t pos = 0; pos < samples.size(); pos += static_cast<size_t>(config.batch_size)) {
      const size_t batch_end = std::min(samples.size(), pos + static_cast<size_t>(config.batch_size));
      const auto batch_n = static_cast<Scalar>(batch_end - pos);
      for (auto& [name, acc] : grad_acc) acc.setZero();

      for (size_t si = pos; si < batch_end; ++si) {
        const auto [ci, vi] = samples[si];
        const auto& me = manifest.entries[static_cast<size_t>(ci)];
        const RenderTarget target =
            load_render_target(cache_dir, *targets.at({me.id, vi}));

        Tape tape;
        const PretextParams bound = bind_to_tape(params, tape);
        PretextForward fwd;
        try {
          fwd = pretext_forward(clouds[static_cast<size_t>(ci)],
                                targets.at({me.id, vi})->view, target, bound,
                                config.variant, config.weights);
        } catch (const NumericalError& e) {
          throw NumericalError("pretrain: step " + std::to_string(step) + " sample " +
                               me.id + "_v" + std::to_string(vi) + ": " + e.what());
        }
        const LossBreakdown& loss = fwd.loss;
        for (const auto& [label, value] :
             {std::pair<const char*, Scalar>{"C_v", loss.vis},
              {"L_d", loss.depth},
              {"L_s", loss.sil},
              {"L_c", loss.cont}})
          if (!std::isfinite(value))
            throw NumericalError("pretrain: non-finite " + std::string(label) +
                                 " at step " + std::to_string(step) + " sample " +
                                 me.id + "_v" + std::to_string(vi));

        sums.total += loss.total.value();
        sums.vis += loss.vis;
        sums.depth += loss.depth;
        sums.sil += loss.sil;
        sums.cont += loss.cont;

        const Tensor scaled = weighted_sum({loss.total}, {1.0 / batch_n});
        const GradientMap grads = tape.backward(scaled);
        for (const auto& name : params.order)
          grad_acc.at(name) += grads.at(bound.at(name));
      }

      for (const auto& name : params.order)
        adam_step(params.tensors.at(name), grad_acc.at(name), adam.at(name));
      ++step;
    }

    const auto samples_n = static_cast<Scalar>(samples.size());
    EpochLoss mean{sums.total / samples_n, sums.vis / samples_n, sums.depth / samples_n,
                   sums.sil / samples_n, sums.cont / samples_n};
    result.log.push_back(mean);
    if (!config.out_dir.empty())
      append_loss_log(config.out_dir + "/losslog.txt", epoch + 1, mean);

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (hook && !hook(epoch, mean, elapsed)) {
      result.aborted = true;
      result.checkpoint.epochs_done = epoch + 1;
      break;
    }
    result.checkpoint.epochs_done = epoch + 1;
  }

  result.checkpoint.params = params;
  result.checkpoint.adam = adam;
  result.checkpoint.rng_state = rng.state();
  result.checkpoint.config = echo;
  if (!config.out_dir.empty())
    save_checkpoint(config.out_dir + "/checkpoint.pvst", result.checkpoint);
  return result;
}

}  // namespace pvst
