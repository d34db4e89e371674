#include <gtest/gtest.h>
TEST(P,B){SUCCEED();}
