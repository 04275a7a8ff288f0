#include "mml/synthdata.hpp"

#include <array>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "mml/io.hpp"

namespace mml {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr char kSplitMagic[9] = "MMLDAT01";

std::vector<Tensor> class_prototypes(const GeneratorSpec& spec) {
  Rng rng(derive_seed(spec.seed, "prototypes"));
  std::vector<Tensor> protos;
  const std::size_t s = spec.image_size;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    Tensor p({s, s});
    for (double& v : p.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    protos.push_back(std::move(p));
  }
  return protos;
}

std::vector<int> balanced_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
  rng.shuffle(labels);
  return labels;
}

Split gen_split(const GeneratorSpec& spec, const std::vector<Tensor>& protos,
                const std::vector<std::array<double, 3>>& palette, double p,
                std::size_t n, const std::string& split_name) {
  Rng rng(derive_seed(spec.seed, "split-" + std::string(split_name)));
  const std::size_t s = spec.image_size;
  const std::size_t px = s * s;
  Split out;
  out.labels = balanced_labels(n, spec.classes, rng);
  out.x0 = Tensor({n, 3, s, s});
  out.x1 = Tensor({n, 1, s, s});
  for (std::size_t i = 0; i < n; ++i) {
    const int y = out.labels[i];
    const Tensor& proto = protos[static_cast<std::size_t>(y)];
    // Gray modality: the reliable shape signal.
    for (std::size_t j = 0; j < px; ++j)
      out.x1[i * px + j] = proto[j] + spec.shape_noise * rng.normal();
    // Color index: the shortcut signal.
    int c = y;
    if (rng.uniform() >= p) {
      std::size_t other = rng.below(spec.classes - 1);
      c = static_cast<int>(other >= static_cast<std::size_t>(y) ? other + 1 : other);
    }
    // Colored modality: the same pattern (independent noise) tinted by c.
    for (std::size_t j = 0; j < px; ++j) {
      double lum = proto[j] + spec.shape_noise * rng.normal();
      for (std::size_t ch = 0; ch < 3; ++ch)
        out.x0[(i * 3 + ch) * px + j] = palette[static_cast<std::size_t>(c)][ch] * lum;
    }
  }
  return out;
}

ByteWriter encode_split(const Split& sp, std::size_t c0, std::size_t c1,
                        std::size_t s) {
  ByteWriter w;
  w.put_raw(kSplitMagic, 8);
  w.put_u64(sp.size());
  w.put_u64(c0);
  w.put_u64(c1);
  w.put_u64(s);
  for (int y : sp.labels) w.put_u32(static_cast<std::uint32_t>(y));
  w.put_doubles(sp.x0.data);
  w.put_doubles(sp.x1.data);
  return w;
}

Split decode_split(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[8];
  r.get_raw(magic, 8);
  if (std::string(magic, 8) != std::string(kSplitMagic, 8))
    throw Error("dataset split: bad magic");
  const std::size_t n = r.get_u64();
  const std::size_t c0 = r.get_u64();
  const std::size_t c1 = r.get_u64();
  const std::size_t s = r.get_u64();
  Split sp;
  sp.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) sp.labels[i] = static_cast<int>(r.get_u32());
  sp.x0 = Tensor({n, c0, s, s});
  r.get_doubles(sp.x0.data, n * c0 * s * s);
  sp.x1 = Tensor({n, c1, s, s});
  r.get_doubles(sp.x1.data, n * c1 * s * s);
  return sp;
}

json spec_to_json(const GeneratorSpec& spec) {
  return json{{"classes", spec.classes},       {"image_size", spec.image_size},
              {"train_size", spec.train_size}, {"val_size", spec.val_size},
              {"test_size", spec.test_size},   {"p_train", spec.p_train},
              {"p_val", spec.p_val},           {"p_test", spec.p_test},
              {"shape_noise", spec.shape_noise}, {"seed", spec.seed}};
}

GeneratorSpec spec_from_json(const json& j) {
  GeneratorSpec s;
  s.classes = j.value("classes", s.classes);
  s.image_size = j.value("image_size", s.image_size);
  s.train_size = j.value("train_size", s.train_size);
  s.val_size = j.value("val_size", s.val_size);
  s.test_size = j.value("test_size", s.test_size);
  s.p_train = j.value("p_train", s.p_train);
  s.p_val = j.value("p_val", s.p_val);
  s.p_test = j.value("p_test", s.p_test);
  s.shape_noise = j.value("shape_noise", s.shape_noise);
  s.seed = j.value("seed", s.seed);
  return s;
}

}  // namespace

void GeneratorSpec::validate() const {
  if (classes < 2) throw Error("GeneratorSpec: need at least 2 classes");
  if (image_size == 0) throw Error("GeneratorSpec: image size must be positive");
  const double chance = 1.0 / static_cast<double>(classes);
  for (double p : {p_train, p_val, p_test})
    if (p < chance || p > 1.0)
      throw Error("GeneratorSpec: correlation p=" + std::to_string(p) +
                  " outside [1/K, 1]");
  if (shape_noise < 0.0) throw Error("GeneratorSpec: shape_noise must be >= 0");
  if (train_size == 0 || val_size == 0 || test_size == 0)
    throw Error("GeneratorSpec: split sizes must be positive");
}

Tensor Split::batch_x0(const std::vector<std::size_t>& idx) const {
  const std::size_t per = x0.size() / x0.shape[0];
  Tensor out({idx.size(), x0.shape[1], x0.shape[2], x0.shape[3]});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(x0.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * per),
              x0.data.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * per),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  return out;
}

Tensor Split::batch_x1(const std::vector<std::size_t>& idx) const {
  const std::size_t per = x1.size() / x1.shape[0];
  Tensor out({idx.size(), x1.shape[1], x1.shape[2], x1.shape[3]});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(x1.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * per),
              x1.data.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * per),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  return out;
}

std::vector<int> Split::batch_labels(const std::vector<std::size_t>& idx) const {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

std::vector<std::array<double, 3>> color_palette(std::size_t k) {
  std::vector<std::array<double, 3>> pal(k);
  for (std::size_t i = 0; i < k; ++i) {
    double h = 6.0 * static_cast<double>(i) / static_cast<double>(k);
    int sector = static_cast<int>(h) % 6;
    double f = h - std::floor(h);
    double q = 1.0 - f;
    switch (sector) {
      case 0: pal[i] = {1.0, f, 0.0}; break;
      case 1: pal[i] = {q, 1.0, 0.0}; break;
      case 2: pal[i] = {0.0, 1.0, f}; break;
      case 3: pal[i] = {0.0, q, 1.0}; break;
      case 4: pal[i] = {f, 0.0, 1.0}; break;
      default: pal[i] = {1.0, 0.0, q}; break;
    }
  }
  return pal;
}

BimodalDataset gen_shortcut_bimodal(const GeneratorSpec& spec) {
  spec.validate();
  auto protos = class_prototypes(spec);
  auto palette = color_palette(spec.classes);
  BimodalDataset ds;
  ds.spec = spec;
  ds.kind = "shortcut";
  ds.c0 = 3;
  ds.c1 = 1;
  ds.train = gen_split(spec, protos, palette, spec.p_train, spec.train_size, "train");
  ds.val = gen_split(spec, protos, palette, spec.p_val, spec.val_size, "val");
  ds.test = gen_split(spec, protos, palette, spec.p_test, spec.test_size, "test");
  return ds;
}

BimodalDataset gen_duplicated(const GeneratorSpec& spec, int source_modality) {
  if (source_modality != 0 && source_modality != 1)
    throw Error("gen_duplicated: source modality must be 0 or 1");
  BimodalDataset base = gen_shortcut_bimodal(spec);
  const std::size_t s = spec.image_size;
  const std::size_t px = s * s;
  auto harmonize = [&](Split& sp) {
    const std::size_t n = sp.size();
    Tensor src({n, 3, s, s});
    if (source_modality == 0) {
      src = sp.x0;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < 3; ++ch)
          std::copy(sp.x1.data.begin() + static_cast<std::ptrdiff_t>(i * px),
                    sp.x1.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * px),
                    src.data.begin() + static_cast<std::ptrdiff_t>((i * 3 + ch) * px));
    }
    sp.x0 = src;
    sp.x1 = std::move(src);
  };
  harmonize(base.train);
  harmonize(base.val);
  harmonize(base.test);
  base.c0 = base.c1 = 3;
  base.kind = source_modality == 0 ? "duplicated-m0" : "duplicated-m1";
  return base;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t epoch_seed) {
  if (batch_size == 0 || batch_size > n)
    throw Error("make_batches: batch size must be in [1, split size]");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(epoch_seed);
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

void save_dataset(const BimodalDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest{{"format", "mml-dataset"},
                {"version", 1},
                {"kind", ds.kind},
                {"c0", ds.c0},
                {"c1", ds.c1},
                {"spec", spec_to_json(ds.spec)}};
  const std::size_t s = ds.spec.image_size;
  json splits = json::object();
  for (auto& [name, split] : {std::pair<std::string, const Split*>{"train", &ds.train},
                              {"val", &ds.val},
                              {"test", &ds.test}}) {
    ByteWriter w = encode_split(*split, ds.c0, ds.c1, s);
    std::string file = name + ".bin";
    write_file((fs::path(dir) / file).string(), w.bytes);
    splits[name] = {{"file", file}, {"samples", split->size()},
                    {"checksum", fnv1a(w.bytes)}};
  }
  manifest["splits"] = splits;
  write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

BimodalDataset load_dataset(const std::string& dir) {
  json manifest = json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
  if (manifest.value("format", "") != "mml-dataset")
    throw Error("load_dataset: not a dataset manifest: " + dir);
  BimodalDataset ds;
  ds.kind = manifest.value("kind", "shortcut");
  ds.c0 = manifest.value("c0", 3);
  ds.c1 = manifest.value("c1", 1);
  ds.spec = spec_from_json(manifest.at("spec"));
  for (auto& [name, split] : {std::pair<std::string, Split*>{"train", &ds.train},
                              {"val", &ds.val},
                              {"test", &ds.test}}) {
    const json& info = manifest.at("splits").at(name);
    auto bytes = read_file((fs::path(dir) / info.at("file").get<std::string>()).string());
    if (fnv1a(bytes) != info.at("checksum").get<std::uint64_t>())
      throw Error("load_dataset: checksum mismatch for split " + name);
    *split = decode_split(bytes);
  }
  return ds;
}

}  // namespace mml
