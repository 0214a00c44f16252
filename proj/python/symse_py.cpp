// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "symse/checkpoint.hpp"
#include "symse/cli.hpp"
#include "symse/dsp.hpp"
#include "symse/enhance.hpp"
#include "symse/errors.hpp"
#include "symse/interp.hpp"
#include "symse/metrics.hpp"
#include "symse/vq.hpp"

namespace py = pybind11;
using namespace symse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

dsp::Waveform wave(const Array& a, int rate) {
  if (a.ndim() != 1) throw ContractError("expected a 1-D sample array");
  dsp::Waveform w;
  w.samples.assign(a.data(), a.data() + a.size());
  w.sample_rate = rate;
  return w;
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array to_array(const dsp::FeatureMatrix& m) {
  Array out({static_cast<py::ssize_t>(m.frames), static_cast<py::ssize_t>(m.dims)});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_symse, m) {
  m.doc() = "Symbolic speech enhancement: DSP, metrics, symbolic book and model inference.";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.attr("SAMPLE_RATE") = dsp::kSampleRate;

  m.def(
      "stoi", [](const Array& clean, const Array& degraded, int rate) {
        return metrics::stoi(wave(clean, rate), wave(degraded, rate));
      },
      py::arg("clean"), py::arg("degraded"), py::arg("sample_rate") = dsp::kSampleRate);
  m.def(
      "segmental_snr",
      [](const Array& clean, const Array& enhanced, int rate) {
        return metrics::segmental_snr(wave(clean, rate), wave(enhanced, rate));
      },
      py::arg("clean"), py::arg("enhanced"), py::arg("sample_rate") = dsp::kSampleRate);

  m.def(
      "mix_at_snr",
      [](const Array& clean, const Array& noise, double snr_db, std::uint64_t seed) {
        auto r = dsp::mix_at_snr(wave(clean, dsp::kSampleRate), wave(noise, dsp::kSampleRate), snr_db, seed);
        return py::make_tuple(to_array(r.noisy.samples), r.noise_gain, r.noise_offset);
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"), py::arg("seed") = 0,
      "Returns (noisy, noise_gain, noise_offset).");
  m.def(
      "snr_db", [](const Array& clean, const Array& noise) {
        return dsp::snr_db(std::span<const double>(clean.data(), clean.size()),
                           std::span<const double>(noise.data(), noise.size()));
      },
      py::arg("clean"), py::arg("noise"));

  m.def(
      "lps", [](const Array& x) { return to_array(dsp::lps(dsp::stft(wave(x, dsp::kSampleRate))).lps); },
      py::arg("samples"), "Log power spectrum, frames x 257.");
  m.def(
      "mfcc", [](const Array& x) { return to_array(dsp::mfcc(wave(x, dsp::kSampleRate))); }, py::arg("samples"),
      "MFCC with deltas, frames x 39.");
  m.def(
      "stft_roundtrip",
      [](const Array& x) {
        auto y = dsp::istft_overlap_add(dsp::stft(wave(x, dsp::kSampleRate)));
        y.samples.resize(static_cast<std::size_t>(x.size()), 0.0);
        return to_array(y.samples);
      },
      py::arg("samples"));

  m.def(
      "nearest_tokens",
      [](const Array& book, const Array& vectors) {
        if (book.ndim() != 2 || vectors.ndim() != 2 || book.shape(1) != vectors.shape(1))
          throw ContractError("nearest_tokens: expected book M x D and vectors N x D");
        vq::SymbolicBook b;
        b.config.size = static_cast<std::size_t>(book.shape(0));
        b.config.dim = static_cast<std::size_t>(book.shape(1));
        b.prototypes.assign(book.data(), book.data() + book.size());
        const std::size_t d = b.config.dim;
        std::vector<std::int32_t> out(static_cast<std::size_t>(vectors.shape(0)));
        for (std::size_t i = 0; i < out.size(); ++i)
          out[i] = vq::nearest(b, std::span<const double>(vectors.data() + i * d, d));
        return out;
      },
      py::arg("book"), py::arg("vectors"), "Nearest prototype per row, lowest index on ties.");

  m.def("js_divergence", [](const Array& p, const Array& q) {
    return interp::js_divergence(std::span<const double>(p.data(), p.size()),
                                 std::span<const double>(q.data(), q.size()));
  });
  m.def(
      "js_matrix",
      [](const std::vector<std::vector<double>>& pdfs) {
        std::vector<interp::PhonemeHistogram> hs;
        for (std::size_t i = 0; i < pdfs.size(); ++i) {
          interp::PhonemeHistogram h;
          h.class_id = static_cast<std::int32_t>(i);
          h.name = std::to_string(i);
          h.pdf = pdfs[i];
          hs.push_back(std::move(h));
        }
        auto js = interp::js_matrix(hs);
        const auto n = static_cast<py::ssize_t>(js.size());
        Array out({n, n});
        std::copy(js.values.begin(), js.values.end(), out.mutable_data());
        return out;
      },
      py::arg("pdfs"));

  py::class_<pipeline::Checkpoint>(m, "Checkpoint")
      .def_static(
          "load", [](const std::filesystem::path& p) { return pipeline::load_checkpoint(p); }, py::arg("path"))
      .def_property_readonly("variant",
                             [](const pipeline::Checkpoint& c) { return model::variant_name(c.config.model.variant); })
      .def_property_readonly("epoch", [](const pipeline::Checkpoint& c) { return c.epoch; })
      .def_property_readonly("best_valid", [](const pipeline::Checkpoint& c) { return c.best_valid; })
      .def_property_readonly("book",
                             [](const pipeline::Checkpoint& c) -> py::object {
                               if (!c.book) return py::none();
                               Array out({static_cast<py::ssize_t>(c.book->size()),
                                          static_cast<py::ssize_t>(c.book->dim())});
                               std::copy(c.book->prototypes.begin(), c.book->prototypes.end(), out.mutable_data());
                               return out;
                             })
      .def(
          "enhance",
          [](const pipeline::Checkpoint& c, const Array& noisy, const std::vector<std::int32_t>& classes) {
            return to_array(pipeline::enhance_utterance(wave(noisy, dsp::kSampleRate), c, classes).samples);
          },
          py::arg("noisy"), py::arg("frame_classes") = std::vector<std::int32_t>{})
      .def(
          "tokens",
          [](const pipeline::Checkpoint& c, const Array& noisy) {
            return pipeline::token_sequence(wave(noisy, dsp::kSampleRate), c);
          },
          py::arg("noisy"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in process; returns (exit_code, stdout, stderr).");
}
