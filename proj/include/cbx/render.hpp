#pragma once

#include "cbx/image.hpp"
#include "cbx/schema.hpp"

namespace cbx {

// Deterministic rasterization of one concept vector.
//
// dsprites / dsprites_colour: an anti-aliased shape (square / ellipse / heart)
// on a black background, scaled, rotated and positioned by the concept values;
// filled white for dsprites, with the Colour concept's RGB for dsprites_colour.
//
// shapes3d_proxy: a stylized 2D stand-in for the 3D scenes — upper band in the
// wall hue, lower band in the floor hue, and a centred object silhouette
// (cube -> square, cylinder -> stacked rect + ellipse cap, sphere -> circle,
// capsule -> rounded rect) filled with the object hue, sized by scale and
// horizontally sheared by orientation.
//
// Anti-aliasing is 2x supersampling followed by a box downsample, so sub-pixel
// position and scale steps remain visible at 64x64.
//
// resolution must be 32 or 64.
Image render(const ConceptSchema& schema, const ConceptVector& c, int resolution = 64);

// Hue in [0, 1) to RGB at full saturation, value 0.9.
Rgb hue_to_rgb(double hue);

}  // namespace cbx
