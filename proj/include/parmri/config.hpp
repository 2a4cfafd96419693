#pragma once

// Text configuration: `key = value` lines, UTF-8, `#` starts a comment.
// Keys may repeat (ellipse definitions). The canonical key set is documented
// in the README.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "parmri/dc.hpp"
#include "parmri/net.hpp"
#include "parmri/operators.hpp"
#include "parmri/optim.hpp"
#include "parmri/simulate.hpp"
#include "parmri/train.hpp"
#include "parmri/types.hpp"

namespace parmri {

struct ConfigError : Error {
  using Error::Error;
};

class KeyValues {
public:
  static KeyValues parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + ": missing '='");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      }
      kv.entries_.emplace_back(key, value);
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return true;
    }
    return false;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    std::string out = fallback;
    for (const auto& [k, v] : entries_) {
      if (k == key) out = v;  // last wins
    }
    return out;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_double(key, get(key, ""));
  }

  int get_int(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    try {
      std::size_t pos = 0;
      const int r = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not an integer: " + v);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: " + v);
  }

  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
      if (k == key) out.push_back(v);
    }
    return out;
  }

  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not a number: " + v);
    }
  }

private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Everything one run needs: model family, DC layer, depth, denoiser plan,
/// optimizer and loss settings, and the seed.
struct RunConfig {
  Variant variant = Variant::SN;
  DcKind dc_kind = DcKind::PM;
  int steps = 3;
  int net_layers = 3;
  int net_features = 16;
  bool net_shared = false;
  int n_maps = 1;
  double dc_eta = 1.0;
  bool dc_train_eta = false;
  double dc_lambda = 0.1;
  int cg_max_iter = 10;
  double cg_tol = 1e-6;
  OptKind opt = OptKind::RMSProp;
  double lr = 1e-4;
  int epochs = 50;
  int lr_halve_every = 15;
  double lambda_l1 = 1e-3;
  double alpha = 1.0;
  double beta = 0.008;
  double gamma = 0.1;  // adversarial loss weight; parsed, unused here
  FinetuneMode finetune_mode = FinetuneMode::DissimilarityHinge;
  int finetune_epochs = 30;
  double finetune_lr = 5e-5;
  int patch_fe = 0;
  std::uint64_t seed = 1;

  void check() const {
    if (steps < 1) throw InvalidParams("RunConfig: steps must be >= 1");
    if (lambda_l1 <= 0.0) throw InvalidParams("RunConfig: loss.l1 must be > 0");
    if (alpha <= 0.0) throw InvalidParams("RunConfig: finetune.alpha must be > 0");
    if (beta <= 0.0 || beta >= 1.0) throw InvalidParams("RunConfig: finetune.beta in (0,1)");
    if (n_maps < 1 || n_maps > 2) throw InvalidParams("RunConfig: n_maps must be 1 or 2");
  }

  DcConfig dc_config() const {
    DcConfig dc;
    dc.kind = dc_kind;
    dc.eta = dc_eta;
    dc.lambda = dc_lambda;
    dc.cg_max_iter = cg_max_iter;
    dc.cg_tol = cg_tol;
    dc.train_eta = dc_train_eta;
    return dc;
  }

  static RunConfig from(const KeyValues& kv) {
    RunConfig c;
    const std::string variant = kv.get("variant", "SN");
    if (variant == "SN") {
      c.variant = Variant::SN;
    } else if (variant == "PCN") {
      c.variant = Variant::PCN;
    } else {
      throw ConfigError("variant must be SN or PCN");
    }
    const std::string dc = kv.get("dc", "PM");
    if (dc == "GD") {
      c.dc_kind = DcKind::GD;
    } else if (dc == "PM") {
      c.dc_kind = DcKind::PM;
    } else if (dc == "VS") {
      c.dc_kind = DcKind::VS;
    } else {
      throw ConfigError("dc must be GD, PM or VS");
    }
    c.steps = kv.get_int("steps", c.steps);
    c.net_layers = kv.get_int("net.layers", c.net_layers);
    c.net_features = kv.get_int("net.features", c.net_features);
    c.net_shared = kv.get_bool("net.shared", c.net_shared);
    c.n_maps = kv.get_int("n_maps", c.n_maps);
    c.dc_eta = kv.get_double("dc.eta", c.dc_eta);
    c.dc_train_eta = kv.get_bool("dc.train_eta", c.dc_train_eta);
    c.dc_lambda = kv.get_double("dc.lambda", c.dc_lambda);
    c.cg_max_iter = kv.get_int("dc.cg_iters", c.cg_max_iter);
    c.cg_tol = kv.get_double("dc.cg_tol", c.cg_tol);
    const std::string opt = kv.get("opt.kind", "rmsprop");
    if (opt == "rmsprop") {
      c.opt = OptKind::RMSProp;
    } else if (opt == "adam") {
      c.opt = OptKind::Adam;
    } else {
      throw ConfigError("opt.kind must be rmsprop or adam");
    }
    c.lr = kv.get_double("opt.lr", c.lr);
    c.epochs = kv.get_int("opt.epochs", c.epochs);
    c.lr_halve_every = kv.get_int("opt.lr_halve_every", c.lr_halve_every);
    c.lambda_l1 = kv.get_double("loss.l1", c.lambda_l1);
    c.alpha = kv.get_double("finetune.alpha", c.alpha);
    c.beta = kv.get_double("finetune.beta", c.beta);
    c.gamma = kv.get_double("loss.gamma", c.gamma);
    const std::string mode = kv.get("finetune.mode", "dissimilarity-hinge");
    if (mode == "literal") {
      c.finetune_mode = FinetuneMode::Literal;
    } else if (mode == "dissimilarity-hinge") {
      c.finetune_mode = FinetuneMode::DissimilarityHinge;
    } else {
      throw ConfigError("finetune.mode must be literal or dissimilarity-hinge");
    }
    c.finetune_epochs = kv.get_int("finetune.epochs", c.finetune_epochs);
    c.finetune_lr = kv.get_double("finetune.lr", c.finetune_lr);
    c.patch_fe = kv.get_int("patch_fe", c.patch_fe);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
    c.check();
    return c;
  }
};

/// Phantom and sampling description for the simulator CLI.
struct SimConfig {
  PhantomSpec phantom;
  int slices = 1;
  double slice_jitter = 0.02;  // per-slice ellipse perturbation
  double R = 1.0;
  int acl = 0;  // 0: whole grid counts as calibration when R = 1
  double fg_threshold = 0.1;

  static SimConfig from(const KeyValues& kv) {
    SimConfig c;
    c.phantom.height = kv.get_int("height", c.phantom.height);
    c.phantom.width = kv.get_int("width", c.phantom.width);
    c.phantom.coil_count = kv.get_int("coils", c.phantom.coil_count);
    c.phantom.coil_width = kv.get_double("coil.width", c.phantom.coil_width);
    c.phantom.coil_phase = kv.get_double("coil.phase", c.phantom.coil_phase);
    c.phantom.noise_sigma = kv.get_double("noise_sigma", c.phantom.noise_sigma);
    for (const std::string& line : kv.all("ellipse")) {
      std::istringstream in(line);
      Ellipse e;
      double re = 0.0, im = 0.0;
      if (!(in >> e.cx >> e.cy >> e.ax >> e.ay >> e.angle >> re)) {
        throw ConfigError("ellipse needs: cx cy ax ay angle re [im]");
      }
      in >> im;  // imaginary part optional
      e.amplitude = Cx(re, im);
      c.phantom.ellipses.push_back(e);
    }
    if (c.phantom.ellipses.empty()) c.phantom.ellipses = default_ellipses();
    c.slices = kv.get_int("slices", c.slices);
    c.slice_jitter = kv.get_double("slice_jitter", c.slice_jitter);
    c.R = kv.get_double("R", c.R);
    c.acl = kv.get_int("acl", c.acl);
    c.fg_threshold = kv.get_double("fg.threshold", c.fg_threshold);
    if (c.slices < 1) throw ConfigError("slices must be >= 1");
    c.phantom.check();
    return c;
  }
};

}  // namespace parmri
