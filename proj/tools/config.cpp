#include "config.hpp"

#include "fedmuon/csv.hpp"
#include "fedmuon/error.hpp"
#include "fedmuon/schedule.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fedmuon::cli {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::ConfigInvalid, key + ": " + why);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

class Reader {
 public:
  explicit Reader(const KeyValues& values) : values_(values) {}

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    return has(key) ? parse_real(key) : fallback;
  }

  double required_real(const std::string& key, const std::string& hint) const {
    if (!has(key)) bad(key, "missing (" + hint + ")");
    return parse_real(key);
  }

  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? parse_integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& raw = values_.at(key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    if (raw.empty() || raw[0] == '-' || *end != '\0' || errno == ERANGE)
      bad(key, "expected a non-negative integer, got '" + raw + "'");
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& raw = values_.at(key);
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    bad(key, "expected true/false, got '" + raw + "'");
  }

 private:
  double parse_real(const std::string& key) const {
    const std::string& raw = values_.at(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(raw.c_str(), &end);
    if (raw.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
      bad(key, "expected a finite number, got '" + raw + "'");
    return v;
  }

  long long parse_integer(const std::string& key) const {
    const std::string& raw = values_.at(key);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(raw.c_str(), &end, 10);
    if (raw.empty() || *end != '\0' || errno == ERANGE)
      bad(key, "expected an integer, got '" + raw + "'");
    return v;
  }

  const KeyValues& values_;
};

int to_int(const std::string& key, long long v, long long lo) {
  if (v < lo || v > 1'000'000'000LL) bad(key, "out of range");
  return static_cast<int>(v);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      bad("line " + std::to_string(lineno), "expected 'key = value', got '" + body + "'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) bad("line " + std::to_string(lineno), "empty key");
    out[key] = value;
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("config", "cannot open '" + path + "'");
  std::ostringstream body;
  body << in.rdbuf();
  return parse_key_values(body.str());
}

const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> keys = {
      "algo",         "ortho",       "workers",     "iters",         "period",
      "eta",          "beta",        "seed",        "schedule",      "lr_schedule",
      "sync_momentum", "theory_mode", "ns_iters",   "threads",       "problem",
      "m",            "n",           "delta",       "problem_seed",  "center_scale",
      "noise",        "sigma",       "p",           "dof",           "calibration_seed",
      "out"};
  return keys;
}

const std::vector<std::string>& informational_keys() {
  static const std::vector<std::string> keys = {"version", "runtime_seconds", "noise_scale",
                                                "problem_lipschitz", "problem_delta"};
  return keys;
}

RunSettings resolve_run_settings(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    const auto& known = run_keys();
    const auto& info = informational_keys();
    if (std::find(known.begin(), known.end(), key) == known.end() &&
        std::find(info.begin(), info.end(), key) == info.end()) {
      bad(key, "unknown key");
    }
  }

  Reader r(values);
  RunSettings s;
  FederationConfig& fed = s.federation;

  const std::string algo = r.text("algo", "fedmuon");
  const std::string ortho = r.text("ortho", "svd");
  OrthoMethod method = OrthoMethod::Exact;
  if (ortho == "svd" || ortho == "exact") {
    method = OrthoMethod::Exact;
  } else if (ortho == "ns" || ortho == "newton-schulz") {
    method = OrthoMethod::NewtonSchulz;
  } else {
    bad("ortho", "expected svd|ns, got '" + ortho + "'");
  }
  if (algo == "fedmuon") {
    fed.optimizer = FedMuonKind{method};
  } else if (algo == "localsgd") {
    fed.optimizer = LocalSgdKind{};
  } else if (algo == "localsgdm") {
    fed.optimizer = LocalSgdmKind{};
  } else {
    bad("algo", "expected fedmuon|localsgd|localsgdm, got '" + algo + "'");
  }

  fed.workers = to_int("workers", r.integer("workers", 1), 1);
  fed.iters = to_int("iters", r.integer("iters", 256), 1);
  fed.seed = r.unsigned_integer("seed", 0);
  fed.sync_momentum = r.boolean("sync_momentum", true);
  fed.theory_mode = r.boolean("theory_mode", true);
  fed.threads = to_int("threads", r.integer("threads", 1), 0);
  fed.newton_schulz.iters = to_int("ns_iters", r.integer("ns_iters", 5), 1);

  const std::string lr = r.text("lr_schedule", "constant");
  if (lr == "constant") {
    fed.lr_schedule = LrSchedule::Constant;
  } else if (lr == "cosine") {
    fed.lr_schedule = LrSchedule::Cosine;
  } else {
    bad("lr_schedule", "expected constant|cosine, got '" + lr + "'");
  }

  const std::string schedule = r.text("schedule", "none");
  if (schedule == "corollary") {
    s.schedule = ScheduleMode::Corollary;
    ScheduleSpec spec;
    try {
      spec = schedule_from_kt(fed.workers, fed.iters);
    } catch (const Error& e) {
      bad("schedule", e.what());
    }
    fed.eta = spec.eta;
    fed.beta = spec.beta;
    fed.period = spec.tau;
  } else if (schedule == "none") {
    const bool sgd = std::holds_alternative<LocalSgdKind>(fed.optimizer);
    fed.eta = r.required_real("eta", "set eta or use schedule = corollary");
    fed.beta = sgd ? r.real("beta", 1.0)
                   : r.required_real("beta", "set beta or use schedule = corollary");
    if (!r.has("period") && fed.workers > 1) bad("period", "missing (set period or use schedule = corollary)");
    fed.period = to_int("period", r.integer("period", 1), 1);
  } else {
    bad("schedule", "expected none|corollary, got '" + schedule + "'");
  }

  const std::string problem = r.text("problem", "quad");
  if (problem == "quad") {
    s.family = ProblemFamily::QuadraticAlign;
  } else if (problem == "rayleigh") {
    s.family = ProblemFamily::RayleighNonconvex;
  } else {
    bad("problem", "expected quad|rayleigh, got '" + problem + "'");
  }
  s.m = to_int("m", r.integer("m", 8), 1);
  s.n = to_int("n", r.integer("n", 4), 1);
  s.delta = r.real("delta", 0.0);
  if (s.delta < 0.0) bad("delta", "must be >= 0");
  if (fed.workers == 1 && s.delta > 0.0) bad("delta", "delta > 0 needs workers >= 2");
  s.problem_seed = r.unsigned_integer("problem_seed", fed.seed);
  s.center_scale = r.real("center_scale", 1.0);

  const std::string noise = r.text("noise", "none");
  if (noise == "none") {
    s.noise = NoiseKind::None;
  } else if (noise == "gaussian") {
    s.noise = NoiseKind::Gaussian;
  } else if (noise == "heavy") {
    s.noise = NoiseKind::HeavyTailed;
  } else {
    bad("noise", "expected none|gaussian|heavy, got '" + noise + "'");
  }
  s.sigma = r.real("sigma", 0.0);
  if (s.sigma < 0.0) bad("sigma", "must be >= 0");
  s.p = r.real("p", 2.0);
  if (s.noise == NoiseKind::HeavyTailed && !(s.p > 1.0 && s.p <= 2.0))
    bad("p", "must lie in (1, 2]");
  if (r.has("dof")) {
    s.dof = r.real("dof", 0.0);
    if (!(*s.dof > s.p)) bad("dof", "must exceed p");
  }
  s.calibration_seed = r.unsigned_integer("calibration_seed", fed.seed);
  s.out_dir = r.text("out", ".");

  fed.validate();
  return s;
}

ProblemInstance build_problem(const RunSettings& s) {
  const int k = s.federation.workers;
  if (s.family == ProblemFamily::QuadraticAlign) {
    QuadraticOptions options;
    options.center_scale = s.center_scale;
    return make_quadratic_align(s.m, s.n, k, s.delta, s.problem_seed, options);
  }
  return make_rayleigh_nonconvex(s.m, s.n, k, s.delta, s.problem_seed);
}

NoiseModel build_noise(const RunSettings& s) {
  switch (s.noise) {
    case NoiseKind::None:
      return NoiseModel::none();
    case NoiseKind::Gaussian:
      return NoiseModel::gaussian(s.sigma);
    case NoiseKind::HeavyTailed: {
      const double dof = s.dof.value_or(s.p + kDefaultDofOffset);
      const double scale = calibrate_heavy_tail(s.sigma, s.p, dof, kMinCalibrationTrials, s.m,
                                                s.n, s.calibration_seed);
      return NoiseModel::heavy_tailed(s.sigma, s.p, dof, scale);
    }
  }
  return NoiseModel::none();
}

std::string manifest_text(const RunSettings& s, const NoiseModel& noise,
                          double runtime_seconds) {
  const FederationConfig& f = s.federation;
  std::ostringstream out;
  auto kv = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  out << "# fedmuon run manifest; replay with: fedmuon run --config <this file>\n";
  kv("version", FEDMUON_VERSION_STRING);
  std::string algo = "fedmuon";
  if (std::holds_alternative<LocalSgdKind>(f.optimizer)) algo = "localsgd";
  if (std::holds_alternative<LocalSgdmKind>(f.optimizer)) algo = "localsgdm";
  kv("algo", algo);
  const auto* muon = std::get_if<FedMuonKind>(&f.optimizer);
  kv("ortho", muon && muon->ortho == OrthoMethod::NewtonSchulz ? "ns" : "svd");
  kv("workers", std::to_string(f.workers));
  kv("iters", std::to_string(f.iters));
  kv("schedule", s.schedule == ScheduleMode::Corollary ? "corollary" : "none");
  kv("period", std::to_string(f.period));
  kv("eta", format_double(f.eta));
  kv("beta", format_double(f.beta));
  kv("lr_schedule", std::string(to_string(f.lr_schedule)));
  kv("sync_momentum", f.sync_momentum ? "true" : "false");
  kv("theory_mode", f.theory_mode ? "true" : "false");
  kv("ns_iters", std::to_string(f.newton_schulz.iters));
  kv("seed", std::to_string(f.seed));
  kv("threads", std::to_string(f.threads));
  kv("problem", std::string(to_string(s.family)));
  kv("m", std::to_string(s.m));
  kv("n", std::to_string(s.n));
  kv("delta", format_double(s.delta));
  kv("problem_seed", std::to_string(s.problem_seed));
  kv("center_scale", format_double(s.center_scale));
  kv("noise", std::string(to_string(s.noise)));
  kv("sigma", format_double(s.sigma));
  kv("p", format_double(s.p));
  if (s.noise == NoiseKind::HeavyTailed) kv("dof", format_double(noise.dof));
  kv("calibration_seed", std::to_string(s.calibration_seed));
  kv("noise_scale", format_double(noise.scale));
  kv("runtime_seconds", format_double(runtime_seconds));
  return out.str();
}

}  // namespace fedmuon::cli
