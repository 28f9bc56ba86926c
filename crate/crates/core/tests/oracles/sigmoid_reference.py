"""High-precision reference values for the logistic function and linear score."""

from mpmath import mp, mpf, exp

mp.dps = 40


def sigmoid(z):
    return 1 / (1 + exp(-mpf(z)))


if __name__ == "__main__":
    for z in ["-1.1528", "1.9170", "-3.283", "-0.9995", "-1.2651"]:
        print(f"sigmoid({z}) = {mp.nstr(sigmoid(z), 25)}")
    circle = [mpf("0.1728"), mpf("1.2064"), mpf("-0.9458"), mpf("-1.1528")]
    print("circle z at (1,1,1) =", mp.nstr(sum(circle), 25))
