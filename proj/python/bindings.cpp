#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "plateid/error.hpp"
#include "plateid/pipeline.hpp"

namespace py = pybind11;
using namespace plateid;

namespace {

Eigen::MatrixXd field_array(const DisplacementField& f) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(f.size()), 3);
  for (std::size_t a = 0; a < f.size(); ++a) out.row(static_cast<Eigen::Index>(a)) = f[a].transpose();
  return out;
}

PipelineConfig config_from(const KeyValues& kv) {
  PipelineConfig c = PipelineConfig::from_key_values(kv);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(plateid, m) {
  m.doc() = "Segmentation and constitutive identification for heterogeneous hyperelastic plates";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<SegmentationFailure>(m, "SegmentationFailure", base.ptr());
  (void)numerical;

  py::class_<WedgeMesh>(m, "WedgeMesh")
      .def_property_readonly("num_nodes", &WedgeMesh::num_nodes)
      .def_property_readonly("num_elements", &WedgeMesh::num_elements)
      .def_property_readonly("thickness", &WedgeMesh::thickness)
      .def_property_readonly("nodes", [](const WedgeMesh& mesh) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(mesh.num_nodes()), 3);
        for (std::size_t a = 0; a < mesh.num_nodes(); ++a)
          x.row(static_cast<Eigen::Index>(a)) = mesh.node(a).transpose();
        return x;
      })
      .def_property_readonly("elements", [](const WedgeMesh& mesh) {
        Eigen::Matrix<long, Eigen::Dynamic, 6, Eigen::RowMajor> e(
            static_cast<Eigen::Index>(mesh.num_elements()), 6);
        for (std::size_t k = 0; k < mesh.num_elements(); ++k)
          for (int i = 0; i < 6; ++i)
            e(static_cast<Eigen::Index>(k), i) = static_cast<long>(mesh.element(k)[i]);
        return e;
      });

  m.def("generate_plate_mesh", &generate_plate_mesh, py::arg("side_length"), py::arg("thickness"),
        py::arg("n_divisions"));
  m.def(
      "pattern_labels",
      [](const WedgeMesh& mesh, const std::string& pattern) {
        return generate_pattern(mesh, parse_pattern(pattern)).element_segment;
      },
      py::arg("mesh"), py::arg("pattern"), "Segment id (1-based) of every element.");

  m.def("feature_names", [] { return FeatureLibrary::standard().names(); });
  m.def(
      "feature_values", [](const Mat3& F) { return FeatureLibrary::standard().values(F); },
      py::arg("F"));
  m.def(
      "strain_energy",
      [](const Mat3& F, const Eigen::VectorXd& theta) {
        return FeatureLibrary::standard().strain_energy(F, theta);
      },
      py::arg("F"), py::arg("theta"));
  m.def(
      "piola",
      [](const Mat3& F, const Eigen::VectorXd& theta) { return FeatureLibrary::standard().piola(F, theta); },
      py::arg("F"), py::arg("theta"));
  m.def(
      "energy_along_path",
      [](const std::string& path, const Eigen::VectorXd& theta, int points) {
        return energy_along_path(DeformationPath::uniform(parse_path_kind(path), points), theta);
      },
      py::arg("path"), py::arg("theta"), py::arg("points") = 101,
      "Strain energy on gamma in [0, 1] along UT, UC, SS, BT, BC or PS.");

  m.def("default_config", [] { return PipelineConfig{}.to_key_values(); },
        "Every configuration key with its default value.");
  m.def(
      "load_config", [](const fs::path& p) { return load_config(p).to_key_values(); },
      py::arg("path"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("mesh", &Dataset::mesh)
      .def_property_readonly("clean", [](const Dataset& d) { return field_array(d.clean); })
      .def_property_readonly("observed", [](const Dataset& d) { return field_array(d.observed); })
      .def_property_readonly("truth", [](const Dataset& d) { return d.truth.element_segment; })
      .def_property_readonly("boundary_forces", [](const Dataset& d) {
        std::map<std::string, Eigen::Vector3d> out;
        for (std::size_t k = 0; k < d.forces.size(); ++k)
          out[d.forces.names[k]] = d.forces.R.row(static_cast<Eigen::Index>(k)).transpose();
        return out;
      });

  py::class_<SegmentationOutput>(m, "Segmentation")
      .def_property_readonly("labels", [](const SegmentationOutput& s) { return s.segments.element_segment; })
      .def_property_readonly("num_segments", [](const SegmentationOutput& s) { return s.segments.num_segments; })
      .def_readonly("flagged", &SegmentationOutput::flagged)
      .def_property_readonly("residual", [](const SegmentationOutput& s) { return s.residual.f_res; })
      .def_property_readonly("mu_over_sigma", [](const SegmentationOutput& s) { return s.diagnostics.mu_over_sigma; })
      .def_property_readonly("sigma_over_rmax",
                             [](const SegmentationOutput& s) { return s.diagnostics.sigma_over_rmax; })
      .def_property_readonly("nominally_homogeneous",
                             [](const SegmentationOutput& s) { return s.diagnostics.nominally_homogeneous; });

  py::class_<Identification>(m, "Identification")
      .def_property_readonly("theta_mean", [](const Identification& i) { return i.posterior.theta_mean; })
      .def_property_readonly("theta_std", [](const Identification& i) { return i.posterior.theta_std; })
      .def_property_readonly("inclusion", [](const Identification& i) { return i.posterior.inclusion; })
      .def_property_readonly("draws", [](const Identification& i) { return i.posterior.theta_matrix(); })
      .def_property_readonly("ols", [](const Identification& i) { return ols_solve(i.system); });

  m.def(
      "generate", [](const KeyValues& cfg) { return generate_dataset(config_from(cfg)); },
      py::arg("config") = KeyValues{}, "Forward-solve a scenario given as {key: value} overrides.");
  m.def(
      "segment",
      [](const Dataset& d, const KeyValues& cfg) { return segment_dataset(d, config_from(cfg)); },
      py::arg("dataset"), py::arg("config") = KeyValues{});
  m.def(
      "identify",
      [](const Dataset& d, const SegmentationOutput& s, const KeyValues& cfg) {
        return identify_materials(d, s, config_from(cfg));
      },
      py::arg("dataset"), py::arg("segmentation"), py::arg("config") = KeyValues{});
  m.def(
      "misassignment",
      [](const std::vector<int>& found, const std::vector<int>& truth) {
        return misassignment(SegmentMap(found), SegmentMap(truth));
      },
      py::arg("found"), py::arg("truth"));
  m.def(
      "run_all", [](const KeyValues& cfg) { run_all(config_from(cfg)); }, py::arg("config"),
      "Run every file stage under config['output'].");
}
