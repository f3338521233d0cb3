#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "relayopt/io.hpp"
#include "relayopt/rotations.hpp"

namespace py = pybind11;
using namespace relayopt;

PYBIND11_MODULE(_core, m) {
  m.doc() = "AF MIMO relay transceiver designs and link-level simulation";

  py::register_exception<InvalidInputError>(m, "InvalidInputError",
                                            PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_RuntimeError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError",
                                          PyExc_RuntimeError);
  py::register_exception<DegenerateChannelError>(m, "DegenerateChannelError",
                                                 PyExc_RuntimeError);

  py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>());

  py::enum_<Objective>(m, "Objective")
      .value("MutualInfo", Objective::MutualInfo)
      .value("ProdMSE", Objective::ProdMSE)
      .value("SumSINR", Objective::SumSINR)
      .value("ProdSINR", Objective::ProdSINR)
      .value("SumMSE", Objective::SumMSE)
      .value("MaxMSE", Objective::MaxMSE)
      .value("HarmonicSINR", Objective::HarmonicSINR)
      .value("MinSINR", Objective::MinSINR);

  py::class_<ChannelSvd>(m, "ChannelSvd")
      .def_readonly("left", &ChannelSvd::left)
      .def_readonly("singular_values", &ChannelSvd::singular_values)
      .def_readonly("right", &ChannelSvd::right)
      .def("gains", &ChannelSvd::gains);

  py::class_<TwoHopChannel>(m, "TwoHopChannel")
      .def(py::init([](const CMat& h_sr, const CMat& h_rd, double rho_1,
                       double rho_2, int num_streams) {
             return TwoHopChannel{h_sr, h_rd, rho_1, rho_2, num_streams};
           }),
           py::arg("h_sr"), py::arg("h_rd"), py::arg("rho_1") = 1.0,
           py::arg("rho_2") = 1.0, py::arg("num_streams") = 1)
      .def_readwrite("h_sr", &TwoHopChannel::h_sr)
      .def_readwrite("h_rd", &TwoHopChannel::h_rd)
      .def_readwrite("rho_1", &TwoHopChannel::rho_1)
      .def_readwrite("rho_2", &TwoHopChannel::rho_2)
      .def_readwrite("num_streams", &TwoHopChannel::num_streams);

  py::class_<TransceiverDesign>(m, "TransceiverDesign")
      .def_readonly("u", &TransceiverDesign::u)
      .def_readonly("f", &TransceiverDesign::f)
      .def_readonly("g", &TransceiverDesign::g)
      .def_readonly("s_rotation", &TransceiverDesign::s_rotation)
      .def_readonly("backward", &TransceiverDesign::backward);

  py::class_<PowerAllocation>(m, "PowerAllocation")
      .def_readonly("a", &PowerAllocation::a)
      .def_readonly("b", &PowerAllocation::b)
      .def_readonly("p_s", &PowerAllocation::p_s)
      .def_readonly("p_r", &PowerAllocation::p_r);

  py::class_<P1Solution>(m, "P1Solution")
      .def_readonly("design", &P1Solution::design)
      .def_readonly("allocation", &P1Solution::allocation)
      .def_readonly("objective_value", &P1Solution::objective_value)
      .def_readonly("converged", &P1Solution::converged)
      .def_readonly("iterations", &P1Solution::iterations);

  py::class_<P2Solution>(m, "P2Solution")
      .def_readonly("design", &P2Solution::design)
      .def_readonly("allocation", &P2Solution::allocation)
      .def_readonly("total_power", &P2Solution::total_power)
      .def_readonly("achieved_mses", &P2Solution::achieved_mses);

  py::class_<DfeDesign>(m, "DfeDesign")
      .def_readonly("base", &DfeDesign::base)
      .def_readonly("l_factor", &DfeDesign::l_factor)
      .def_readonly("d_scale", &DfeDesign::d_scale);

  py::class_<DfeP1Solution>(m, "DfeP1Solution")
      .def_readonly("design", &DfeP1Solution::design)
      .def_readonly("allocation", &DfeP1Solution::allocation)
      .def_readonly("objective_value", &DfeP1Solution::objective_value);

  py::class_<DfeP2Solution>(m, "DfeP2Solution")
      .def_readonly("design", &DfeP2Solution::design)
      .def_readonly("allocation", &DfeP2Solution::allocation)
      .def_readonly("total_power", &DfeP2Solution::total_power)
      .def_readonly("achieved_mses", &DfeP2Solution::achieved_mses);

  py::class_<RotationResult>(m, "RotationResult")
      .def_readonly("s", &RotationResult::s)
      .def_readonly("achieved_diag", &RotationResult::achieved_diag)
      .def_readonly("residual", &RotationResult::residual);

  py::class_<TriangularFactorization>(m, "TriangularFactorization")
      .def_readonly("q", &TriangularFactorization::q)
      .def_readonly("r", &TriangularFactorization::r)
      .def_readonly("p", &TriangularFactorization::p);

  // channel_model
  m.def("svd_sorted", &svd_sorted, py::arg("h"));
  m.def(
      "rayleigh_channel",
      [](int rows, int cols, Rng& rng) {
        return rayleigh_channel(rows, cols, rng);
      },
      py::arg("rows"), py::arg("cols"), py::arg("rng"));
  m.def("random_two_hop", &random_two_hop, py::arg("n_s"), py::arg("n_r"),
        py::arg("num_streams"), py::arg("rho_1"), py::arg("rho_2"),
        py::arg("rng"));

  // mse_engine
  m.def("effective_noise_cov", &effective_noise_cov);
  m.def("noise_cov", &noise_cov);
  m.def("wiener_receiver", &wiener_receiver);
  m.def("mse_matrix", &mse_matrix);
  m.def("mmse_matrix", &mmse_matrix);
  m.def("mmse_matrix_cov", &mmse_matrix_cov);
  m.def("sinr_from_mse", &sinr_from_mse);
  m.def("relay_tx_power", &relay_tx_power);
  m.def("stream_mse", &stream_mse);
  m.def("chain_stream_mse", &chain_stream_mse);

  // objectives
  m.def("evaluate_objective", &evaluate, py::arg("objective"), py::arg("mses"));
  m.def("objective_from_name", &objective_from_name);

  // unitary_factors
  m.def("dft_or_hadamard", &dft_or_hadamard);
  m.def("mean_equalizing_rotation", &mean_equalizing_rotation);
  m.def("schur_horn_rotation", &schur_horn_rotation);
  m.def("gmd", &gmd);
  m.def("gtd", &gtd);

  // designs
  m.def(
      "design_p1",
      [](const TwoHopChannel& ch, Objective obj, double p_s, double p_r) {
        return design_p1(ch, obj, p_s, p_r);
      },
      py::arg("channel"), py::arg("objective"), py::arg("p_s"), py::arg("p_r"));
  m.def("naf_design", &naf_design);
  m.def(
      "design_p2",
      [](const TwoHopChannel& ch, const Vec& eta) {
        return design_p2(ch, QoSTargets{eta});
      },
      py::arg("channel"), py::arg("eta"));
  m.def(
      "sa_design_p2",
      [](const TwoHopChannel& ch, const Vec& eta) {
        return sa_design_p2(ch, QoSTargets{eta});
      },
      py::arg("channel"), py::arg("eta"));
  m.def(
      "design_dfe_p1",
      [](const TwoHopChannel& ch, Objective obj, double p_s, double p_r) {
        return design_dfe_p1(ch, obj, p_s, p_r);
      },
      py::arg("channel"), py::arg("objective"), py::arg("p_s"), py::arg("p_r"));
  m.def(
      "design_dfe_p2",
      [](const TwoHopChannel& ch, const Vec& eta) {
        return design_dfe_p2(ch, QoSTargets{eta});
      },
      py::arg("channel"), py::arg("eta"));
  m.def("per_stream_min_power", &per_stream_min_power, py::arg("t"),
        py::arg("lam_sr"), py::arg("lam_rd"), py::arg("rho"));
  m.def("grid_oracle_p2", &grid_oracle_p2);

  // simkit
  m.def("qam_mod", &qam_mod);
  m.def("qam_demod", &qam_demod);
  m.def(
      "empirical_mse",
      [](const TransceiverDesign& d, const TwoHopChannel& ch, long trials,
         std::uint64_t seed) {
        Rng rng(seed);
        return empirical_mse(d, ch, trials, rng);
      },
      py::arg("design"), py::arg("channel"), py::arg("trials"),
      py::arg("seed"));
  m.def("simulate_ber_json", [](const std::string& config_json) {
    const SimConfig cfg = sim_config_from_json(config_json);
    return ber_curves_to_csv(simulate_ber(cfg));
  });
  m.def("power_experiment_json", [](const std::string& config_json) {
    const SimConfig cfg = sim_config_from_json(config_json);
    return power_rows_to_csv(power_experiment(cfg));
  });
}
