#include "mml/checkpoint.hpp"

#include <filesystem>

#include <json.hpp>

#include "mml/io.hpp"

namespace mml {

using nlohmann::json;

namespace {

json arch_to_json(const ArchConfig& a) {
  json layers = json::array();
  for (const auto& l : a.layers)
    layers.push_back({{"out_channels", l.out_channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"pad", l.pad}});
  return {{"layers", layers},
          {"fusion_after", a.fusion_after},
          {"classes", a.classes},
          {"fusion_reduction", a.fusion_reduction},
          {"batchnorm", a.batchnorm},
          {"average_probs", a.average_probs}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.layers.clear();
  for (const auto& l : j.at("layers"))
    a.layers.push_back({l.at("out_channels").get<std::size_t>(),
                        l.at("kernel").get<std::size_t>(),
                        l.at("stride").get<std::size_t>(),
                        l.at("pad").get<std::size_t>()});
  a.fusion_after = j.at("fusion_after").get<std::vector<std::size_t>>();
  a.classes = j.at("classes").get<std::size_t>();
  a.fusion_reduction = j.at("fusion_reduction").get<std::size_t>();
  a.batchnorm = j.at("batchnorm").get<bool>();
  a.average_probs = j.at("average_probs").get<bool>();
  return a;
}

}  // namespace

void save_checkpoint(const std::string& dir, MultiModalNet& net,
                     const TrainSnapshot& snap) {
  auto named = net.named_tensors();
  if (snap.tensors.size() != named.size())
    throw Error("save_checkpoint: snapshot does not match the network");
  auto params = net.all_params();
  if (snap.momentum.size() != params.size())
    throw Error("save_checkpoint: momentum buffers do not match the network");

  ByteWriter blob;
  json table = json::array();
  auto emit = [&](const std::string& name, const std::string& label,
                  const Tensor& t) {
    table.push_back({{"name", name},
                     {"label", label},
                     {"shape", t.shape},
                     {"offset", blob.bytes.size()}});
    blob.put_doubles(t.data);
  };
  for (std::size_t i = 0; i < named.size(); ++i)
    emit(named[i].name, named[i].label, snap.tensors[i]);
  for (std::size_t i = 0; i < params.size(); ++i)
    emit("momentum." + params[i]->name, "momentum", snap.momentum[i]);

  json man;
  man["format_version"] = kCheckpointVersion;
  man["arch"] = arch_to_json(net.cfg);
  man["in_c0"] = net.in_c0;
  man["in_c1"] = net.in_c1;
  man["img"] = net.img;
  man["tensors"] = table;
  man["fusion_h_counts"] = snap.fusion_h_counts;
  man["fusion_w_counts"] = snap.fusion_w_counts;
  man["accumulator"] = {{"m_theta0", snap.acc.m_theta0},
                        {"m_fusion0", snap.acc.m_fusion0},
                        {"m_theta1", snap.acc.m_theta1},
                        {"m_fusion1", snap.acc.m_fusion1},
                        {"steps", snap.acc.steps}};
  man["counters"] = {{"epochs_done", snap.epochs_done},
                     {"total_steps", snap.total_steps},
                     {"best_val_acc", snap.best_val_acc},
                     {"best_epoch", snap.best_epoch},
                     {"best_steps", snap.best_steps},
                     {"q", snap.q},
                     {"last_diff_speed", snap.last_diff_speed}};
  man["blob_checksum"] = fnv1a(blob.bytes);
  man["blob_bytes"] = blob.bytes.size();

  std::filesystem::create_directories(dir);
  write_file(dir + "/tensors.bin", blob.bytes);
  write_text_file(dir + "/manifest.json", man.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  json man = json::parse(read_text_file(dir + "/manifest.json"));
  if (man.at("format_version").get<std::uint32_t>() != kCheckpointVersion)
    throw Error("load_checkpoint: unsupported format version");
  auto bytes = read_file(dir + "/tensors.bin");
  if (bytes.size() != man.at("blob_bytes").get<std::size_t>() ||
      fnv1a(bytes) != man.at("blob_checksum").get<std::uint64_t>())
    throw Error("load_checkpoint: tensor blob checksum mismatch");

  Checkpoint cp;
  cp.arch = arch_from_json(man.at("arch"));
  cp.in_c0 = man.at("in_c0").get<std::size_t>();
  cp.in_c1 = man.at("in_c1").get<std::size_t>();
  cp.img = man.at("img").get<std::size_t>();

  ByteReader rd(bytes);
  for (const auto& entry : man.at("tensors")) {
    Tensor t;
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (entry.at("offset").get<std::size_t>() != rd.pos)
      throw Error("load_checkpoint: tensor table offset mismatch");
    rd.get_doubles(t.data, shape_size(t.shape));
    if (entry.at("label").get<std::string>() == "momentum")
      cp.snap.momentum.push_back(std::move(t));
    else
      cp.snap.tensors.push_back(std::move(t));
  }
  if (rd.pos != bytes.size())
    throw Error("load_checkpoint: trailing bytes in tensor blob");

  cp.snap.fusion_h_counts =
      man.at("fusion_h_counts").get<std::vector<std::size_t>>();
  cp.snap.fusion_w_counts =
      man.at("fusion_w_counts").get<std::vector<std::size_t>>();
  const json& acc = man.at("accumulator");
  cp.snap.acc.m_theta0 = acc.at("m_theta0").get<double>();
  cp.snap.acc.m_fusion0 = acc.at("m_fusion0").get<double>();
  cp.snap.acc.m_theta1 = acc.at("m_theta1").get<double>();
  cp.snap.acc.m_fusion1 = acc.at("m_fusion1").get<double>();
  cp.snap.acc.steps = acc.at("steps").get<std::size_t>();
  const json& cnt = man.at("counters");
  cp.snap.epochs_done = cnt.at("epochs_done").get<std::size_t>();
  cp.snap.total_steps = cnt.at("total_steps").get<std::size_t>();
  cp.snap.best_val_acc = cnt.at("best_val_acc").get<double>();
  cp.snap.best_epoch = cnt.at("best_epoch").get<std::size_t>();
  cp.snap.best_steps = cnt.at("best_steps").get<std::size_t>();
  cp.snap.q = cnt.at("q").get<std::size_t>();
  cp.snap.last_diff_speed = cnt.at("last_diff_speed").get<double>();
  return cp;
}

MultiModalNet restore_net(const Checkpoint& cp) {
  MultiModalNet net =
      MultiModalNet::create(cp.arch, cp.in_c0, cp.in_c1, cp.img, /*seed=*/0);
  std::vector<Tensor> momentum = cp.snap.momentum;
  restore_snapshot(net, momentum, cp.snap);
  return net;
}

}  // namespace mml
