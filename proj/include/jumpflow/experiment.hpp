#pragma once

// Batch experiments: JSON configuration, model presets and the subcommands
// driven by the command-line tool. Every output file is a function of the
// resolved configuration alone; the worker count never changes a byte.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jumpflow/controllability.hpp"
#include "jumpflow/coupling.hpp"
#include "jumpflow/galerkin.hpp"
#include "jumpflow/network.hpp"
#include "jumpflow/pdmp.hpp"

namespace jumpflow {

struct LawConfig {
  std::string kind = "gaussian";  // gaussian | laplace | mixture | per_bath
  double sigma = 1.0;             // gaussian sigma, laplace scale, per-bath amplitude sigma
  double weight = 0.5;            // mixture
  double mu1 = -1.0, sigma1 = 0.5;
  double mu2 = 1.0, sigma2 = 0.5;
};

struct SystemConfig {
  /// linear1d | linear | cubic1d | oscillator2d | nonlinear2d | galerkin | chain-langevin | chain-semimarkov
  std::string preset = "linear1d";
  double rate = 1.0;
  LawConfig law;
  IntegratorConfig integrator;

  int dim = 2;          // linear
  double alpha = 0.5;   // linear, linear1d: f = -alpha x; oscillators: position damping
  double damping = 1.0; // oscillators: velocity damping

  GalerkinSystem galerkin;

  int chain_length = 3;
  std::vector<int> driven = {0, 2};
  double gamma = 1.0;
  double lambda = 0.1;
  std::string potential = "zero";  // zero | cos_sum | bump
  double potential_amplitude = 0.1;
  double potential_width = 1.0;
};

struct CouplingConfig {
  std::optional<Vector> x_hat;  // default 0
  double r = 1.0;
  int m = 1;
  std::string mode = "exact";
  /// Radius of B(0, R) for I; negative selects the Lyapunov level.
  double R = -1.0;
  long max_blocks = 1'000'000;
  ShootingConfig shooting;
};

struct SimulateConfig {
  int k_max = 10;
  int grid_points = 21;
  int trajectory_points = 201;
};

struct MixingConfig {
  int grid_points = 41;
  int bins = 0;
  int bootstrap = 100;
  double fit_quantile = 0.95;
};

struct CheckConfig {
  std::optional<double> alpha;  // default: preset dissipation rate
  std::optional<double> beta;   // default: fitted on the probe sample
  int samples = 256;
  double sample_radius = 5.0;
  int probes = 64;
  std::vector<double> s_hat;    // default: m copies of 1 / rate
  TowerOptions tower;
};

struct SteerConfig {
  std::optional<Vector> u0;
  std::vector<Vector> targets;  // explicit targets; otherwise random ones
  int random_targets = 10;
  double target_norm = 2.0;
  double eps = 1e-2;
  double time_budget = 20.0;
  SteeringOptions options;
  std::vector<double> scaling_deltas = {0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125,
                                        0.0009765625};
};

struct NetworkCheckConfig {
  int ray_points = 12;
  double ray_min = 0.1;
  double ray_max = 1e3;
  int ph_orders = 0;
};

struct ExperimentConfig {
  SystemConfig system;
  std::uint64_t seed = 1;
  std::size_t replicas = 1000;
  double horizon = 10.0;
  std::optional<Vector> x0, x0_prime;
  CouplingConfig coupling;
  SimulateConfig simulate;
  MixingConfig mixing;
  CheckConfig check;
  SteerConfig steer;
  NetworkCheckConfig network;
  std::string out = "out";
  unsigned threads = 0;  // not part of the resolved configuration

  /// Parses JSON text; unknown keys and malformed values raise ValidationError.
  static ExperimentConfig parse(const std::string& json_text);
  /// Fully resolved configuration (defaults filled in), without the thread count.
  std::string to_json() const;
};

/// A preset instantiated.
struct BuiltSystem {
  SystemSpec spec;
  std::optional<GalerkinModel> galerkin;
  std::optional<NetworkSpec> network;
  double alpha = 0.0;  // dissipation rate in (C1)
  bool linear = false; // f is linear, so the Kalman test applies
  Vector x0, x0_prime;
};

BuiltSystem build_system(const ExperimentConfig& cfg);

/// Lyapunov level 2 sqrt((beta / alpha)(1 + rate / (2 alpha))).
double lyapunov_radius(double alpha, double beta, double rate);

CouplingPolicy make_policy(const ExperimentConfig& cfg, const BuiltSystem& sys);

const std::vector<std::string>& subcommands();

/// Runs a subcommand, writing into cfg.out; returns the summary JSON text.
std::string run_experiment(const std::string& subcommand, const ExperimentConfig& cfg);

}  // namespace jumpflow
