#include <cstring>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sgvc/blob.hpp"
#include "sgvc/checkpoint.hpp"
#include "sgvc/config.hpp"
#include "sgvc/error.hpp"
#include "sgvc/evaluator.hpp"
#include "sgvc/inference.hpp"
#include "sgvc/losses.hpp"

namespace py = pybind11;
using namespace sgvc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Waveform to_wave(const FloatArray& samples, int rate) {
  if (samples.ndim() != 1) throw DataError("waveform must be a 1-D array");
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(samples.data(), samples.data() + samples.size());
  return w;
}

py::array_t<float> from_wave(const Waveform& w) {
  py::array_t<float> out(static_cast<py::ssize_t>(w.samples.size()));
  std::copy(w.samples.begin(), w.samples.end(), out.mutable_data());
  return out;
}

torch::Tensor to_tensor(const FloatArray& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

py::array_t<float> from_tensor(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  py::array_t<float> out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), c.numel() * sizeof(float));
  return out;
}

MelSpectrogram to_mel(const FloatArray& a) {
  if (a.ndim() != 2) throw ShapeError("mel must be a 2-D (rows, frames) array");
  return MelSpectrogram(to_tensor(a));
}

double scalar(const torch::Tensor& t) { return t.item<double>(); }

// Trained model plus the analysis settings it was trained with.
struct LoadedModel {
  CheckpointMeta meta;
  std::shared_ptr<VoiceConversionModel> model;

  py::array_t<float> convert(const FloatArray& source, const std::vector<FloatArray>& references) {
    std::vector<MelSpectrogram> refs;
    for (const auto& r : references) refs.push_back(to_mel(r));
    return from_tensor(
        convert_mel(*model, to_mel(source), reference_style(*model, refs, meta.mel), meta.mel).values());
  }
  py::array_t<float> reconstruct(const FloatArray& source) {
    return from_tensor(reconstruct_mel(*model, to_mel(source), meta.mel).values());
  }
  std::vector<int> classify(const FloatArray& mels) {
    auto t = to_tensor(mels);
    if (t.dim() == 3) t = t.unsqueeze(1);
    return sgvc::classify(*model, t);
  }
};

}  // namespace

PYBIND11_MODULE(_sgvc, m) {
  m.doc() = "Subband GAN voice conversion: mel pipeline, losses, metrics and trained models";

  auto base = py::register_exception<Error>(m, "SgvcError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<LabelError>(m, "LabelError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<EmptyInputError>(m, "EmptyInputError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());

  py::class_<MelConfig>(m, "MelConfig")
      .def(py::init<>())
      .def_readwrite("fft_size", &MelConfig::fft_size)
      .def_readwrite("hop_size", &MelConfig::hop_size)
      .def_readwrite("n_mels", &MelConfig::n_mels)
      .def_readwrite("target_width", &MelConfig::target_width)
      .def_readwrite("sample_rate", &MelConfig::sample_rate)
      .def_readwrite("log_floor", &MelConfig::log_floor)
      .def_readwrite("literal_zero_pad", &MelConfig::literal_zero_pad)
      .def("silence_value", &MelConfig::silence_value)
      .def("pad_value", &MelConfig::pad_value);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("compact", &ModelConfig::compact, py::arg("num_speakers"), py::arg("num_subbands") = 4)
      .def_readwrite("num_subbands", &ModelConfig::num_subbands)
      .def_readwrite("num_speakers", &ModelConfig::num_speakers)
      .def_readwrite("style_dim", &ModelConfig::style_dim)
      .def_readwrite("content_channels", &ModelConfig::content_channels)
      .def_readwrite("base_channels", &ModelConfig::base_channels)
      .def_readwrite("max_shift_rows", &ModelConfig::max_shift_rows)
      .def_readwrite("dropout_p", &ModelConfig::dropout_p)
      .def_readwrite("mel_center", &ModelConfig::mel_center)
      .def_readwrite("mel_scale", &ModelConfig::mel_scale)
      .def("validate", &ModelConfig::validate);

  py::class_<LossWeights>(m, "LossWeights")
      .def(py::init<>())
      .def_readwrite("adv", &LossWeights::adv)
      .def_readwrite("id", &LossWeights::id)
      .def_readwrite("style", &LossWeights::style)
      .def_readwrite("content", &LossWeights::content)
      .def_readwrite("ds", &LossWeights::ds)
      .def_readwrite("norm", &LossWeights::norm)
      .def_readwrite("rec", &LossWeights::rec);

  // Audio and mel pipeline
  m.def("load_audio", [](const std::filesystem::path& p, int rate) {
    return from_wave(load_and_resample(p, rate));
  }, py::arg("path"), py::arg("sample_rate") = 22050, "Mono float samples resampled to sample_rate.");
  m.def("write_wav", [](const std::filesystem::path& p, const FloatArray& s, int rate) {
    write_wav(p, to_wave(s, rate));
  }, py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 22050);
  m.def("resample", [](const FloatArray& s, int from, int to) {
    return from_wave(resample(to_wave(s, from), to));
  }, py::arg("samples"), py::arg("from_rate"), py::arg("to_rate"));
  m.def("mel_spectrogram", [](const FloatArray& s, const MelConfig& cfg) {
    return from_tensor(mel_spectrogram(to_wave(s, cfg.sample_rate), cfg).values());
  }, py::arg("samples"), py::arg("config") = MelConfig{});
  m.def("mel_filterbank", [](const MelConfig& cfg) { return from_tensor(mel_filterbank(cfg)); },
        py::arg("config") = MelConfig{});
  m.def("fit_width", [](const FloatArray& mel, int64_t target, double pad) {
    return from_tensor(fit_width(to_mel(mel), target, pad).values());
  }, py::arg("mel"), py::arg("target"), py::arg("pad_value"));
  m.def("column_norm", [](const FloatArray& mel) { return from_tensor(column_norm(to_tensor(mel))); });
  m.def("griffin_lim", [](const FloatArray& mel, const MelConfig& cfg, int iters, std::uint64_t seed) {
    auto r = griffin_lim_invert(to_mel(mel), cfg, iters, seed);
    return py::make_tuple(from_wave(r.wave), r.spectral_convergence);
  }, py::arg("mel"), py::arg("config") = MelConfig{}, py::arg("iterations") = 60, py::arg("seed") = 0,
     "Returns (samples, spectral convergence per iteration).");
  m.def("read_mel", [](const std::filesystem::path& p) { return from_tensor(read_mel_blob(p).values()); });
  m.def("write_mel", [](const std::filesystem::path& p, const FloatArray& mel) {
    write_mel_blob(p, to_mel(mel));
  });

  // Pitch and metrics
  m.def("estimate_f0", [](const FloatArray& s, const MelConfig& cfg) {
    const auto t = estimate_f0(to_wave(s, cfg.sample_rate), cfg);
    return py::make_tuple(t.f0_hz, t.voiced);
  }, py::arg("samples"), py::arg("config") = MelConfig{}, "Returns (f0_hz, voiced) per frame.");
  m.def("f0_diff", [](const FloatArray& conv, const std::vector<FloatArray>& refs, const MelConfig& cfg)
            -> py::object {
    std::vector<Waveform> r;
    for (const auto& a : refs) r.push_back(to_wave(a, cfg.sample_rate));
    const auto d = compute_f0_diff(to_wave(conv, cfg.sample_rate), r, cfg);
    if (!d.valid) return py::none();
    return py::float_(d.value);
  }, py::arg("converted"), py::arg("references"), py::arg("config") = MelConfig{},
     "Absolute mean-F0 difference in Hz, or None when the conversion is unvoiced.");

  // Losses on numpy arrays
  m.def("adversarial_loss", [](const FloatArray& r, const FloatArray& f) {
    return scalar(adversarial_loss(to_tensor(r), to_tensor(f)));
  });
  m.def("style_diversification_loss", [](const FloatArray& a, const FloatArray& b) {
    return scalar(style_diversification_loss(to_tensor(a), to_tensor(b)));
  });
  m.def("norm_consistency_loss", [](const FloatArray& x, const FloatArray& g) {
    return scalar(norm_consistency_loss(to_tensor(x), to_tensor(g)));
  });
  m.def("reconstruction_loss", [](const FloatArray& x, const FloatArray& g) {
    return scalar(reconstruction_loss(to_tensor(x), to_tensor(g)));
  });
  m.def("cross_entropy", [](const FloatArray& logits, const std::vector<int64_t>& labels) {
    return scalar(cross_entropy(to_tensor(logits), torch::tensor(labels, torch::kLong)));
  });
  m.def("total_generator_objective", [](const std::map<std::string, double>& c, const LossWeights& w) {
    LossComponents lc;
    auto get = [&](const char* k) { auto it = c.find(k); return it == c.end() ? 0.0 : it->second; };
    lc = {get("adv"), get("fake_id"), get("trg_id"), get("style"), get("content"),
          get("ds"), get("norm"), get("rec")};
    return total_generator_objective(lc, w).total;
  }, py::arg("components"), py::arg("weights") = LossWeights{});

  // Configuration
  m.def("default_config", [] { return to_json(RunConfig{}).dump(); }, "Default run configuration as JSON text.");
  m.def("apply_overrides", [](const std::string& json_text, const std::vector<std::string>& overrides) {
    auto cfg = run_config_from_json(nlohmann::json::parse(json_text));
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return to_json(cfg).dump();
  });

  // Trained models
  py::class_<LoadedModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& dir) {
        auto c = load_checkpoint(dir);
        return LoadedModel{c.meta, c.model};
      }, py::arg("checkpoint_dir"))
      .def_static("create", [](const ModelConfig& cfg, std::uint64_t seed) {
        torch::manual_seed(seed);
        LoadedModel lm;
        lm.meta.model = cfg;
        lm.model = std::make_shared<VoiceConversionModel>(cfg);
        return lm;
      }, py::arg("config"), py::arg("seed") = 0, "Untrained model, mainly for tests.")
      .def_property_readonly("speakers", [](const LoadedModel& m) { return m.meta.speakers; })
      .def_property_readonly("step", [](const LoadedModel& m) { return m.meta.step; })
      .def_property_readonly("stage", [](const LoadedModel& m) { return m.meta.stage; })
      .def("convert", &LoadedModel::convert, py::arg("source_mel"), py::arg("reference_mels"),
           "Source mel converted with the mean style of the references.")
      .def("reconstruct", &LoadedModel::reconstruct, py::arg("source_mel"))
      .def("classify", &LoadedModel::classify, py::arg("mels"),
           "Argmax speaker index of each (rows, frames) window.");
}
