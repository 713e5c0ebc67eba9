#include "scoreflow/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace scoreflow {

namespace {

constexpr char kMagic[] = "SFCKPT1\n";

void write_doubles(std::ostream& os, const VectorXd& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

VectorXd read_doubles(std::istream& is, long n) {
  VectorXd v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint: truncated payload");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json header;
  header["format_version"] = ck.format_version;
  header["model_kind"] = ck.model_kind;
  header["input_dim"] = ck.config.input_dim;
  header["hidden"] = ck.config.hidden;
  header["output_dim"] = ck.config.output_dim;
  header["activation"] = ck.config.activation;
  header["seed"] = ck.seed;
  header["iteration"] = ck.iteration;
  header["param_count"] = ck.params.size();
  header["payload"] = "f64le";
  header["has_adam"] = ck.has_adam;
  if (ck.has_adam) header["adam_step"] = ck.adam_step;
  const std::string htext = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic) - 1);
  const uint64_t hlen = htext.size();
  os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  os.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  write_doubles(os, ck.params);
  if (ck.has_adam) {
    write_doubles(os, ck.adam_m);
    write_doubles(os, ck.adam_v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[sizeof(kMagic) - 1];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  uint64_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  is.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw std::runtime_error("checkpoint: truncated header");
  const nlohmann::json header = nlohmann::json::parse(htext);

  Checkpoint ck;
  ck.format_version = header.at("format_version").get<int>();
  if (ck.format_version != 1)
    throw std::runtime_error("checkpoint: unsupported format version");
  ck.model_kind = header.at("model_kind").get<std::string>();
  ck.config.input_dim = header.at("input_dim").get<int>();
  ck.config.hidden = header.at("hidden").get<std::vector<int>>();
  ck.config.output_dim = header.at("output_dim").get<int>();
  ck.config.activation = header.at("activation").get<std::string>();
  ck.seed = header.at("seed").get<uint64_t>();
  ck.iteration = header.at("iteration").get<long>();
  const long n = header.at("param_count").get<long>();
  if (n != ck.config.parameter_count())
    throw std::runtime_error("checkpoint: parameter count does not match architecture");
  ck.params = read_doubles(is, n);
  ck.has_adam = header.value("has_adam", false);
  if (ck.has_adam) {
    ck.adam_step = header.at("adam_step").get<long>();
    ck.adam_m = read_doubles(is, n);
    ck.adam_v = read_doubles(is, n);
  }
  return ck;
}

}  // namespace scoreflow
