#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mjp/errors.hpp"
#include "mjp/harness.hpp"

namespace mjp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where + ": missing \"" + key + "\"");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const json::exception& e) {
    fail(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return get<T>(j, key, where);
}

std::vector<double> number_list(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) fail(where + ": expected a nonempty list of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) fail(where + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

OmegaPolicy parse_omega(const json& j, const std::string& where) {
  const auto kind = get_or<std::string>(j, "kind", "single", where);
  const double kappa = get_or<double>(j, "kappa", 2.0, where);
  OmegaPolicy p;
  if (kind == "single") p = OmegaPolicy::single(kappa);
  else if (kind == "additive") p = OmegaPolicy::additive(kappa);
  else if (kind == "max_of_max") p = OmegaPolicy::max_of_max(kappa);
  else fail(where + ": unknown omega kind \"" + kind + "\"");
  p.validate();
  return p;
}

Matrix parse_matrix(const json& j, std::size_t dim, const std::string& where) {
  if (!j.is_array() || j.size() != dim) fail(where + ": covariance must be " + std::to_string(dim) + "x" + std::to_string(dim));
  Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < dim; ++r) {
    const auto row = number_list(j[r], where);
    if (row.size() != dim) fail(where + ": covariance row has the wrong length");
    for (std::size_t c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

std::string format_scale(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

// Expands one sampler entry into its (proposal x particle count) settings.
void expand_sampler(const json& j, std::size_t index, const ModelSpec& model,
                    std::vector<SamplerSetting>& out) {
  const std::string where = "samplers[" + std::to_string(index) + "]";
  SamplerSetting base;
  base.kernel.kind = parse_kernel(get<std::string>(j, "kernel", where));
  base.omega = j.contains("omega") ? parse_omega(j.at("omega"), where + ".omega") : OmegaPolicy::single(2.0);
  const bool pair_policy = base.omega.kind != OmegaPolicy::Kind::single;
  if (base.kernel.kind == KernelKind::symmetrized_mh && !pair_policy && base.omega.kappa <= 1.0)
    fail(where + ": kappa must exceed 1");

  const auto step = get_or<std::string>(j, "parameter_step", "automatic", where);
  if (step == "automatic") base.kernel.parameter_step = ParameterStep::automatic;
  else if (step == "conjugate") base.kernel.parameter_step = ParameterStep::conjugate;
  else if (step == "metropolis") base.kernel.parameter_step = ParameterStep::metropolis;
  else fail(where + ": unknown parameter_step \"" + step + "\"");
  if (base.kernel.kind == KernelKind::gibbs && base.kernel.parameter_step == ParameterStep::conjugate &&
      !has_conjugate_update(model.family))
    fail(where + ": family " + std::string(family_name(model.family)) + " has no conjugate update");

  const auto resampling = get_or<std::string>(j, "resampling", "multinomial", where);
  if (resampling == "multinomial") base.kernel.resampling = Resampling::multinomial;
  else if (resampling == "systematic") base.kernel.resampling = Resampling::systematic;
  else fail(where + ": unknown resampling \"" + resampling + "\"");

  std::vector<int> particle_counts{10};
  if (j.contains("particles")) {
    particle_counts.clear();
    for (double p : number_list(j.at("particles"), where + ".particles")) {
      if (!(p >= 1.0) || p != std::floor(p)) fail(where + ".particles: counts must be positive integers");
      particle_counts.push_back(static_cast<int>(p));
    }
  }
  if (base.kernel.kind != KernelKind::pmmh) particle_counts = {0};

  const std::string label = std::string(kernel_name(base.kernel.kind)) + " " + base.omega.label();
  const bool needs_proposal =
      base.kernel.kind != KernelKind::gibbs ||
      base.kernel.parameter_step == ParameterStep::metropolis ||
      (base.kernel.parameter_step == ParameterStep::automatic && !has_conjugate_update(model.family));

  struct Proposal {
    ProposalKernel kernel;
    double scale;
    std::string tag;
    bool pilot = false;
    int pilot_iterations = 500;
  };
  std::vector<Proposal> proposals;
  const std::size_t dim = model.num_parameters();
  if (!needs_proposal) {
    proposals.push_back({model.proposal, std::numeric_limits<double>::quiet_NaN(), "", false, 0});
  } else {
    const json prop = j.contains("proposal") ? j.at("proposal") : json{{"kind", "lognormal"}, {"variances", {1.0}}};
    const std::string pw = where + ".proposal";
    const auto kind = get_or<std::string>(prop, "kind", "lognormal", pw);
    if (kind == "lognormal") {
      for (double v : number_list(require(prop, "variances", pw), pw + ".variances")) {
        if (!(v > 0.0)) fail(pw + ": variances must be positive");
        proposals.push_back({ProposalKernel::lognormal(v, dim), v, "var=" + format_scale(v)});
      }
    } else if (kind == "gaussian") {
      const auto scales = number_list(require(prop, "scales", pw), pw + ".scales");
      const json& cov = require(prop, "covariance", pw);
      const bool pilot = cov.is_string();
      if (pilot && cov.get<std::string>() != "pilot_gibbs")
        fail(pw + ": covariance must be a matrix or \"pilot_gibbs\"");
      const int pilot_iterations = get_or<int>(prop, "pilot_iterations", 500, pw);
      if (pilot && pilot_iterations < 10) fail(pw + ": pilot_iterations must be at least 10");
      for (double s : scales) {
        if (!(s > 0.0)) fail(pw + ": scales must be positive");
        ProposalKernel k;
        if (pilot) {
          k.kind = ProposalKernel::Kind::gaussian_rw;
          k.scale = s;
        } else {
          try {
            k = ProposalKernel::gaussian(parse_matrix(cov, dim, pw + ".covariance"), s);
          } catch (const ConfigError& e) {
            fail(pw + ": " + e.what());
          }
        }
        proposals.push_back({k, s, "scale=" + format_scale(s), pilot, pilot_iterations});
      }
    } else {
      fail(pw + ": unknown proposal kind \"" + kind + "\"");
    }
  }

  for (int particles : particle_counts) {
    for (const auto& p : proposals) {
      SamplerSetting s = base;
      s.kernel.particles = particles > 0 ? particles : base.kernel.particles;
      s.series = label;
      if (particles > 0) s.series += " P=" + std::to_string(particles);
      s.id = p.tag.empty() ? s.series : s.series + " " + p.tag;
      s.proposal = p.kernel;
      s.proposal_scale = p.scale;
      s.pilot_covariance = p.pilot;
      s.pilot_iterations = p.pilot_iterations;
      out.push_back(std::move(s));
    }
  }
}

ModelSpec parse_model(const json& j) {
  const std::string where = "model";
  const Family family = parse_family(get<std::string>(j, "family", where));
  const int dim = get_or<int>(j, "dim", family == Family::jc69 ? 4 : family == Family::mmpp_two_state ? 2 : 3, where);
  if (dim < 1) fail(where + ".dim must be positive");
  ModelSpec spec = default_spec(family, dim);
  if (j.contains("priors")) {
    const json& pj = j.at("priors");
    if (!pj.is_array()) fail(where + ".priors must be a list of {shape, rate}");
    spec.priors.clear();
    for (const auto& p : pj) {
      GammaPrior g{get<double>(p, "shape", where + ".priors"), get<double>(p, "rate", where + ".priors")};
      if (!(g.shape > 0.0) || !(g.rate > 0.0)) fail(where + ".priors: shape and rate must be positive");
      spec.priors.push_back(g);
    }
  }
  if (j.contains("pi0")) spec.pi0 = number_list(j.at("pi0"), where + ".pi0");
  spec.inhomogeneity_period = get_or<double>(j, "inhomogeneity_period", spec.inhomogeneity_period, where);
  if (!(spec.inhomogeneity_period > 0.0)) fail(where + ".inhomogeneity_period must be positive");
  return spec;
}

DataSource parse_data(const json& j, const std::filesystem::path& base_dir) {
  const std::string where = "data";
  DataSource d;
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "synthetic") {
    d.kind = DataSource::Kind::synthetic;
    auto& s = d.synthetic;
    s.t_end = get_or<double>(j, "t_end", 20.0, where);
    if (!(s.t_end > 0.0)) fail(where + ".t_end must be positive");
    if (j.contains("observation_times")) s.observation_times = number_list(j.at("observation_times"), where + ".observation_times");
    s.n_observations = get_or<int>(j, "n_observations", 19, where);
    if (s.n_observations < 0) fail(where + ".n_observations must be nonnegative");
    s.observation_spacing = get_or<double>(j, "observation_spacing", 0.0, where);
    if (s.observation_spacing < 0.0) fail(where + ".observation_spacing must be nonnegative");
    s.noise_variance = get_or<double>(j, "noise_variance", 1.0, where);
    if (!(s.noise_variance > 0.0)) fail(where + ".noise_variance must be positive");
    for (double t : s.observation_times)
      if (!(t >= 0.0 && t <= s.t_end)) fail(where + ".observation_times must lie in [0, t_end]");
  } else if (kind == "event_file") {
    d.kind = DataSource::Kind::event_file;
    std::filesystem::path p = get<std::string>(j, "path", where);
    d.event_file.path = p.is_absolute() ? p : base_dir / p;
    d.event_file.rescale_to = get_or<double>(j, "rescale_to", 20.0, where);
    if (!(d.event_file.rescale_to > 0.0)) fail(where + ".rescale_to must be positive");
  } else {
    fail(where + ": unknown kind \"" + kind + "\"");
  }
  return d;
}

}  // namespace

std::vector<double> SyntheticDataConfig::resolved_times() const {
  if (!observation_times.empty()) {
    auto t = observation_times;
    std::sort(t.begin(), t.end());
    return t;
  }
  std::vector<double> t;
  if (observation_spacing > 0.0) {
    for (int k = 1; k * observation_spacing < t_end; ++k) t.push_back(k * observation_spacing);
    return t;
  }
  for (int k = 1; k <= n_observations; ++k) t.push_back(t_end * k / (n_observations + 1));
  return t;
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail("config must be a JSON object");
  const int version = get<int>(j, "schema_version", "config");
  if (version != kConfigSchemaVersion)
    fail("unsupported schema_version " + std::to_string(version) + " (expected 1)");

  ExperimentConfig c;
  c.base_dir = base_dir;
  c.name = get_or<std::string>(j, "name", "experiment", "config");
  c.model = parse_model(require(j, "model", "config"));
  c.data = parse_data(require(j, "data", "config"), base_dir);
  if (c.model.family == Family::mmpp_two_state) {
    if (c.data.kind == DataSource::Kind::synthetic && !c.data.synthetic.observation_times.empty())
      fail("data: the mmpp family observes events, not observation times");
  } else if (c.data.kind == DataSource::Kind::event_file) {
    fail("data: event files need the mmpp_two_state family");
  }
  c.model.horizon = c.data.t_end();
  c.model.validate();

  const long long n_iter = get_or<long long>(j, "n_iter", 1000, "config");
  if (n_iter < 1) fail("n_iter must be at least 1");
  c.n_iter = static_cast<std::size_t>(n_iter);
  const long long reps = get_or<long long>(j, "n_replicates", 1, "config");
  if (reps < 1) fail("n_replicates must be at least 1");
  c.n_replicates = static_cast<std::size_t>(reps);
  c.seed = get_or<std::uint64_t>(j, "seed", 1, "config");
  c.burn_in = get_or<double>(j, "burn_in", 0.1, "config");
  if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) fail("burn_in must lie in [0, 1)");
  c.threads = get_or<int>(j, "threads", 1, "config");
  if (c.threads < 1) fail("threads must be at least 1");
  c.write_chains = get_or<bool>(j, "write_chains", true, "config");

  const json& samplers = require(j, "samplers", "config");
  if (!samplers.is_array() || samplers.empty()) fail("samplers must be a nonempty list");
  for (std::size_t i = 0; i < samplers.size(); ++i) expand_sampler(samplers[i], i, c.model, c.settings);
  for (const auto& s : c.settings) {
    if (s.kernel.kind == KernelKind::pmmh && c.model.family == Family::mmpp_two_state)
      fail("pmmh supports Gaussian observations only");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace mjp
