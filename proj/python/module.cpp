// Python bindings. Complex data crosses the boundary as complex128 arrays and
// real data as float64 arrays, both copied.

#include <complex>
#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ffcnet/app.hpp"
#include "ffcnet/fft.hpp"
#include "ffcnet/layers.hpp"
#include "ffcnet/spectral.hpp"

namespace py = pybind11;
using namespace ffcnet;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::array& a) {
  std::vector<std::size_t> dims(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) dims[i] = static_cast<std::size_t>(a.shape(i));
  return Shape(std::move(dims));
}

Tensor<double> to_tensor(const RealArray& a) {
  return Tensor<double>(shape_of(a), std::vector<double>(a.data(), a.data() + a.size()));
}

ComplexTensor<double> to_complex(const ComplexArray& a) {
  ComplexTensor<double> t(shape_of(a));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    t.re()[i] = a.data()[i].real();
    t.im()[i] = a.data()[i].imag();
  }
  return t;
}

RealArray from_tensor(const Tensor<double>& t) {
  RealArray out(t.shape().dims());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ComplexArray from_complex(const ComplexTensor<double>& t) {
  ComplexArray out(t.shape().dims());
  for (std::size_t i = 0; i < t.size(); ++i) out.mutable_data()[i] = {t.re()[i], t.im()[i]};
  return out;
}

PsmConfig make_psm(int patches, double shuffle_prob, std::uint64_t seed) {
  PsmConfig cfg;
  cfg.patches_per_side = patches;
  cfg.shuffle_prob = shuffle_prob;
  cfg.seed = seed;
  return cfg;
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::kGenData, Command::kPreprocess, Command::kTrain, Command::kEval, Command::kSweep,
                    Command::kInspect}) {
    if (name == command_name(c)) return c;
  }
  throw ConfigError("unknown command '" + name + "'");
}

RunConfig make_config(const std::map<std::string, std::string>& settings) {
  RunConfig cfg;
  for (const auto& [key, value] : settings) apply_setting(cfg, key, value);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(ffcnet, m) {
  m.doc() = "Frequency-domain complex-valued CNN primitives and run commands";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("fft2", [](const ComplexArray& x) { return from_complex(fft2(to_complex(x))); }, py::arg("x"),
        "Unnormalized 2-d DFT over the last two axes (power-of-two sizes).");
  m.def("dft2_naive", [](const ComplexArray& x) { return from_complex(dft2_naive(to_complex(x))); }, py::arg("x"));
  m.def("idft2", [](const ComplexArray& x) { return from_complex(idft2(to_complex(x))); }, py::arg("spectrum"));
  m.def("fftshift2", [](const RealArray& x) { return from_tensor(fftshift2(to_tensor(x))); }, py::arg("x"));

  m.def(
      "partition",
      [](const RealArray& image, int patches) { return from_tensor(partition(to_tensor(image), patches)); },
      py::arg("image"), py::arg("patches"), "(C, H, W) -> (C, K*K, H/K, W/K).");
  m.def(
      "apply_psm",
      [](const RealArray& image, int patches, double shuffle_prob, std::uint64_t seed, bool training) {
        const auto s = apply_psm(to_tensor(image), make_psm(patches, shuffle_prob, seed), training);
        return py::make_tuple(from_complex(s.patches), s.permutation.order, s.permutation.triggered);
      },
      py::arg("image"), py::arg("patches") = 4, py::arg("shuffle_prob") = 0.3, py::arg("seed") = 0,
      py::arg("training") = false,
      "Patch spectra in channel layout, the slot permutation and whether the shuffle triggered.");

  m.def(
      "complex_conv2d",
      [](const ComplexArray& x, const ComplexArray& kernel, std::optional<ComplexArray> bias, int stride,
         int padding) {
        const auto k = to_complex(kernel);
        ComplexConvParams<double> p{k.re(), k.im(), std::nullopt, stride, padding};
        if (bias) p.bias = to_complex(*bias);
        return from_complex(complex_conv2d(to_complex(x), p));
      },
      py::arg("x"), py::arg("kernel"), py::arg("bias") = py::none(), py::arg("stride") = 1, py::arg("padding") = 0,
      "x (B, Cin, H, W), kernel (Cout, Cin, k, k), bias (Cout).");
  m.def("complex_relu", [](const ComplexArray& x) { return from_complex(complex_relu(to_complex(x))); },
        py::arg("x"));
  m.def(
      "complex_bn",
      [](const ComplexArray& x, std::optional<RealArray> gamma, std::optional<RealArray> beta) {
        const auto t = to_complex(x);
        auto p = make_complex_bn<double>(t.shape()[1]);
        if (gamma) p.gamma = to_tensor(*gamma);
        if (beta) p.beta = to_tensor(*beta);
        return from_complex(complex_bn_forward(t, p, /*training=*/true));
      },
      py::arg("x"), py::arg("gamma") = py::none(), py::arg("beta") = py::none(),
      "Training-mode complex batch norm with batch statistics. gamma (C, 3) as (rr, ii, ri), beta (C, 2).");

  m.def(
      "summarize",
      [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& counts, bool macro) {
        if (counts.ndim() != 2 || counts.shape(0) != counts.shape(1)) throw ShapeError("counts must be C x C");
        const auto C = static_cast<std::size_t>(counts.shape(0));
        ConfusionMatrix cm(C);
        for (std::size_t t = 0; t < C; ++t) {
          for (std::size_t p = 0; p < C; ++p) {
            for (std::uint64_t k = 0; k < counts.at(t, p); ++k) cm.update(t, p);
          }
        }
        const auto s = summarize(cm, macro ? Averaging::kMacro : Averaging::kWeighted);
        py::dict d;
        d["accuracy"] = s.accuracy;
        d["precision"] = s.precision;
        d["recall"] = s.recall;
        d["f1"] = s.f1;
        d["warnings"] = s.warnings;
        return d;
      },
      py::arg("counts"), py::arg("macro") = false, "Fractions from a confusion matrix (rows = true class).");

  m.def(
      "config",
      [](const std::map<std::string, std::string>& settings) { return dump_config(make_config(settings)); },
      py::arg("settings") = std::map<std::string, std::string>{}, "Resolved configuration as INI text.");
  m.def(
      "run",
      [](const std::string& command, const std::map<std::string, std::string>& settings) {
        const RunConfig cfg = make_config(settings);
        py::gil_scoped_release release;
        run_command(parse_command(command), cfg);
      },
      py::arg("command"), py::arg("settings") = std::map<std::string, std::string>{},
      "Runs a command (gen-data, preprocess, train, eval, sweep, inspect) with 'section.key' settings.");
}
