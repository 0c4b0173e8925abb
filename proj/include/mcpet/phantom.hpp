#pragma once

#include <vector>

#include "mcpet/image.hpp"

namespace mcpet {

struct Disk
{
    Vec2 center;
    double radius = 0.0;
};

/*!
 * Rod layout of the Derenzo-style phantom.
 *
 * Six 60 degree sectors, one per rod radius in {1.8, 1.4, 1.1, 0.9, 0.7,
 * 0.55}, with the first sector bisected by the +y axis and the others
 * following counter-clockwise. Rods are hexagonally packed in rows
 * perpendicular to the sector bisector, centre spacing 4 r, and kept inside
 * a disk of radius 17 about the origin. Every sector is mirror symmetric
 * about its own bisector.
 */
std::vector<Disk> derenzo_rods();

//! Rod radii in sector order.
const std::vector<double>& derenzo_radii();

/*!
 * Rasterise the phantom at unit density times `dose`, using 4x4
 * supersampling per pixel for the partial-volume fraction.
 */
DensityImage make_derenzo(const GridGeometry& geom, double dose);

}  // namespace mcpet
