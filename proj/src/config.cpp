#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace prism {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an unsigned integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_int(key, trim(part)));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "data.corpus") data.corpus = v;
  else if (key == "data.train") data.train = v;
  else if (key == "data.dev") data.dev = v;
  else if (key == "data.test") data.test = v;
  else if (key == "data.schema") data.schema = v;
  else if (key == "data.split") {
    data.split = to_int_list(key, v);
    if (data.split.size() == 2) data.split.push_back(0);
    if (data.split.size() != 3)
      throw ConfigError("data.split expects train,dev[,test] counts, got '" + v + "'");
  } else if (key == "data.subsample") data.subsample = to_int(key, v);
  else if (key == "data.subsample_tolerance") data.subsample_tolerance = to_double(key, v);
  else if (key == "data.subsample_seed") data.subsample_seed = to_u64(key, v);
  else if (key == "encoder.dim") encoder.dim = to_int(key, v);
  else if (key == "encoder.layers") encoder.layers = to_int(key, v);
  else if (key == "encoder.heads") encoder.heads = to_int(key, v);
  else if (key == "encoder.ff_dim") encoder.ff_dim = to_int(key, v);
  else if (key == "encoder.max_chunk") encoder.max_chunk = to_int(key, v);
  else if (key == "encoder.dropout") encoder.dropout = to_double(key, v);
  else if (key == "head.hidden") head.hidden = to_int(key, v);
  else if (key == "head.lambda") head.lambda = to_double(key, v);
  else if (key == "head.prism") head.prism = to_bool(key, v);
  else if (key == "head.model_na") head.model_na = to_bool(key, v);
  else if (key == "train.batch_size") train.batch_size = to_int(key, v);
  else if (key == "train.lr") train.lr = to_double(key, v);
  else if (key == "train.warmup_ratio") train.warmup_ratio = to_double(key, v);
  else if (key == "train.weight_decay") train.weight_decay = to_double(key, v);
  else if (key == "train.max_grad_norm") train.max_grad_norm = to_double(key, v);
  else if (key == "train.max_tolerance") train.max_tolerance = to_int(key, v);
  else if (key == "train.epochs") train.epochs = to_int(key, v);
  else if (key == "calibration.bins") calibration.bins = to_int(key, v);
  else if (key == "calibration.ranges") calibration.ranges = to_int(key, v);
  else if (key == "calibration.method") calibration.method = v;
  else if (key == "calibration.population") calibration.population = v;
  else if (key == "calibration.top_k") calibration.top_k = to_int(key, v);
  else if (key == "seed") seed = to_u64(key, v);
  else throw ConfigError("unknown config key: " + key);
}

void ExperimentConfig::validate() const {
  encoder.validate();
  head.validate();
  train.validate();
  if (calibration.bins < 1) throw ConfigError("calibration.bins must be positive");
  if (calibration.ranges < 1) throw ConfigError("calibration.ranges must be positive");
  if (calibration.method != "none" && calibration.method != "ts" &&
      calibration.method != "cda-ts")
    throw ConfigError("calibration.method must be none, ts or cda-ts");
  if (calibration.population != "all" && calibration.population != "positive")
    throw ConfigError("calibration.population must be all or positive");
  if (calibration.top_k < 1) throw ConfigError("calibration.top_k must be positive");
  if (data.subsample < 0) throw ConfigError("data.subsample must be non-negative");
  if (data.subsample_tolerance <= 0.0)
    throw ConfigError("data.subsample_tolerance must be positive");
  for (int s : data.split)
    if (s < 0) throw ConfigError("data.split counts must be non-negative");
}

void ExperimentConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    set(section.empty() ? key : section + "." + key, value);
  }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  ExperimentConfig cfg;
  cfg.apply_file(path);
  return cfg;
}

std::string ExperimentConfig::echo() const {
  std::ostringstream o;
  o << "seed = " << seed << "\n\n";
  o << "[data]\n";
  o << "corpus = " << data.corpus << "\n";
  o << "train = " << data.train << "\n";
  o << "dev = " << data.dev << "\n";
  o << "test = " << data.test << "\n";
  o << "schema = " << data.schema << "\n";
  o << "split = " << data.split[0] << "," << data.split[1] << "," << data.split[2] << "\n";
  o << "subsample = " << data.subsample << "\n";
  o << "subsample_tolerance = " << fmt(data.subsample_tolerance) << "\n";
  o << "subsample_seed = " << data.subsample_seed << "\n\n";
  o << "[encoder]\n";
  o << "dim = " << encoder.dim << "\n";
  o << "layers = " << encoder.layers << "\n";
  o << "heads = " << encoder.heads << "\n";
  o << "ff_dim = " << encoder.ff_dim << "\n";
  o << "max_chunk = " << encoder.max_chunk << "\n";
  o << "dropout = " << fmt(encoder.dropout) << "\n\n";
  o << "[head]\n";
  o << "hidden = " << head.hidden << "\n";
  o << "lambda = " << fmt(head.lambda) << "\n";
  o << "prism = " << (head.prism ? "on" : "off") << "\n";
  o << "model_na = " << (head.model_na ? "true" : "false") << "\n\n";
  o << "[train]\n";
  o << "batch_size = " << train.batch_size << "\n";
  o << "lr = " << fmt(train.lr) << "\n";
  o << "warmup_ratio = " << fmt(train.warmup_ratio) << "\n";
  o << "weight_decay = " << fmt(train.weight_decay) << "\n";
  o << "max_grad_norm = " << fmt(train.max_grad_norm) << "\n";
  o << "max_tolerance = " << train.max_tolerance << "\n";
  o << "epochs = " << train.epochs << "\n\n";
  o << "[calibration]\n";
  o << "bins = " << calibration.bins << "\n";
  o << "ranges = " << calibration.ranges << "\n";
  o << "method = " << calibration.method << "\n";
  o << "population = " << calibration.population << "\n";
  o << "top_k = " << calibration.top_k << "\n";
  return o.str();
}

}  // namespace prism
