#pragma once

#include <span>

#include "mcpet/image.hpp"

namespace mcpet {

/*!
 * Generalised Kullback-Leibler divergence between nonnegative vectors,
 *   d(u || v) = sum_i u_i log(u_i / v_i) - u_i + v_i,
 * with 0 log 0 = 0. Returns +infinity when some u_i > 0 has v_i = 0.
 */
double kl_vec(std::span<const double> u, std::span<const double> v);

//! kl_vec applied pixelwise to two densities, weighted by pixel area.
double kl_images(const DensityImage& p, const DensityImage& q);

}  // namespace mcpet
