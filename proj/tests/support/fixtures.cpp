#include "fixtures.hpp"

namespace fixture {

using srla::GaussianDiag;
using srla::IohmmParams;
using srla::RunToFailureDataset;
using srla::SyntheticConfig;
using srla::UnitTrajectory;

IohmmParams two_state() {
  IohmmParams p;
  p.n_states = 2;
  p.n_inputs = 1;
  p.pi = Eigen::Vector2d(0.7, 0.3);
  Eigen::MatrixXd A(2, 2);
  A << 0.9, 0.1, 0.2, 0.8;
  p.trans = {A};
  GaussianDiag g0{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
  GaussianDiag g1{Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 0.5)};
  p.emis = {{g0}, {g1}};
  p.validate();
  return p;
}

IohmmParams three_state_two_input() {
  IohmmParams p;
  p.n_states = 3;
  p.n_inputs = 2;
  p.pi = Eigen::Vector3d(1.0, 0.0, 0.0);
  Eigen::MatrixXd A0(3, 3), A1(3, 3);
  A0 << 0.8, 0.2, 0.0, 0.0, 0.85, 0.15, 0.0, 0.0, 1.0;
  A1 << 0.6, 0.4, 0.0, 0.0, 0.7, 0.3, 0.0, 0.0, 1.0;
  p.trans = {A0, A1};
  p.emis.resize(3);
  for (int s = 0; s < 3; ++s) {
    for (int u = 0; u < 2; ++u) {
      GaussianDiag g;
      g.mean = Eigen::VectorXd::Constant(2, 2.0 * s + 0.1 * u);
      g.var = Eigen::VectorXd::Constant(2, 0.25);
      p.emis[static_cast<std::size_t>(s)].push_back(g);
    }
  }
  p.validate();
  return p;
}

RunToFailureDataset tiny_dataset() {
  RunToFailureDataset data;
  data.sensor_names = {"s_1"};
  data.op_setting_names = {"op_1"};

  UnitTrajectory u1;
  u1.unit_id = 1;
  u1.sensors = Eigen::MatrixXd(3, 1);
  u1.sensors << 2.0, 4.0, 6.0;
  u1.op_settings = Eigen::MatrixXd(3, 1);
  u1.op_settings << 10.0, 10.0, 20.0;

  UnitTrajectory u2;
  u2.unit_id = 2;
  u2.sensors = Eigen::MatrixXd(4, 1);
  u2.sensors << 1.0, 3.0, 5.0, 7.0;
  u2.op_settings = Eigen::MatrixXd(4, 1);
  u2.op_settings << 20.0, 10.0, 20.0, 10.0;

  data.units = {u1, u2};
  data.validate();
  return data;
}

SyntheticConfig chain_config(int n_states, int n_inputs, int n_units, int d_y, double separation,
                             double noise_var) {
  std::vector<Eigen::VectorXd> fwd;
  for (int u = 0; u < n_inputs; ++u) {
    Eigen::VectorXd p(n_states - 1);
    for (int s = 0; s < n_states - 1; ++s) {
      double base = 0.12 + 0.02 * u;
      if (s >= n_states - 3) base += 0.1;
      p(s) = base;
    }
    fwd.push_back(p);
  }
  return SyntheticConfig::left_to_right(fwd, d_y, separation, noise_var, n_units);
}

RunToFailureDataset chain_dataset(int n_states, int n_inputs, int n_units, std::uint64_t seed) {
  return srla::generate_synthetic(chain_config(n_states, n_inputs, n_units), seed).data;
}

IohmmParams params_from(const SyntheticConfig& config) {
  IohmmParams p;
  p.n_states = config.n_states;
  p.n_inputs = config.n_inputs;
  p.pi = config.pi;
  p.trans = config.transition;
  p.emis.resize(static_cast<std::size_t>(config.n_states));
  for (int s = 0; s < config.n_states; ++s) {
    GaussianDiag g;
    g.mean = config.emission_mean.row(s).transpose();
    g.var = config.emission_var.row(s).transpose();
    p.emis[static_cast<std::size_t>(s)].assign(static_cast<std::size_t>(config.n_inputs), g);
  }
  p.validate();
  return p;
}

}  // namespace fixture
