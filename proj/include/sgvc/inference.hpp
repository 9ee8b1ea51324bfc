#pragma once

#include <torch/torch.h>

#include <vector>

#include "sgvc/dsp.hpp"
#include "sgvc/model.hpp"

namespace sgvc {

/// Mean style code (1, parts, style_dim) over reference utterances. Each
/// reference contributes its first fixed-width window. Throws
/// EmptyInputError without references.
torch::Tensor reference_style(VoiceConversionModel& model,
                              const std::vector<MelSpectrogram>& references,
                              const MelConfig& cfg);

/// Converts a source mel of any width: the source is cut into consecutive
/// fixed-width windows (the last one padded), each window is decoded with
/// `style`, and the result is trimmed back to the source width. Runs in
/// eval mode without gradients.
MelSpectrogram convert_mel(VoiceConversionModel& model, const MelSpectrogram& source,
                           const torch::Tensor& style, const MelConfig& cfg);

/// Self-reconstruction: convert_mel with the source's own style.
MelSpectrogram reconstruct_mel(VoiceConversionModel& model, const MelSpectrogram& source,
                               const MelConfig& cfg);

}  // namespace sgvc
