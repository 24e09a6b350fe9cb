#ifndef ENTCONV_ENTCONV_HPP
#define ENTCONV_ENTCONV_HPP

#include "entconv/util.hpp"
#include "entconv/series.hpp"
#include "entconv/decay.hpp"
#include "entconv/spectrum.hpp"
#include "entconv/svd.hpp"
#include "entconv/majorization.hpp"
#include "entconv/locc.hpp"
#include "entconv/slocc.hpp"
#include "entconv/rank_monotone.hpp"
#include "entconv/io.hpp"

#endif
