#pragma once

#include "cloudsplit/anonymize.hpp"
#include "cloudsplit/bytes.hpp"
#include "cloudsplit/config.hpp"
#include "cloudsplit/crypto.hpp"
#include "cloudsplit/csv.hpp"
#include "cloudsplit/entropy_split.hpp"
#include "cloudsplit/error.hpp"
#include "cloudsplit/field.hpp"
#include "cloudsplit/homomorphic.hpp"
#include "cloudsplit/integrity.hpp"
#include "cloudsplit/persistence.hpp"
#include "cloudsplit/ranking.hpp"
#include "cloudsplit/report.hpp"
#include "cloudsplit/router.hpp"
#include "cloudsplit/scenario.hpp"
#include "cloudsplit/shamir.hpp"
#include "cloudsplit/simcloud.hpp"
#include "cloudsplit/types.hpp"
