"""Synonym triples and the conversation-isolation suite.

The triples table mirrors docs/spoken-grammar.md; each row lists three
utterances that must parse to structurally equal trees.
"""

SYNONYM_TRIPLES = [
    # over / divided by / by
    ("x over 3", "x divided by 3", "x by 3"),
    ("a over b", "a divided by b", "a by b"),
    ("pi over two", "pi divided by two", "pi by two"),
    ("x plus one over y", "x plus one divided by y", "x plus one by y"),
    ("two over x squared", "two divided by x squared", "two by x squared"),
    ("theta one over two", "theta one divided by two", "theta one by two"),
    ("alpha over beta", "alpha divided by beta", "alpha by beta"),
    ("x squared over y", "x squared divided by y", "x squared by y"),
    # squared / to the second / to the power of two
    ("x squared", "x to the second", "x to the power of two"),
    ("y cubed", "y to the third", "y to the power of three"),
    ("x to the fourth", "x to the fourth power", "x to the power of four"),
    ("two to the n", "two to the power of n", "two raised to the n"),
    ("x squared plus one", "x to the second plus one",
     "x to the power of two plus one"),
    ("z squared", "z raised to the second power", "z to the power of two"),
    # equals / is equal to
    ("x equals y", "x is equal to y", "x is y"),
    ("a plus b equals c", "a plus b is equal to c", "a plus b is c"),
    ("x squared equals four", "x squared is equal to four",
     "x squared is four"),
    # roots
    ("the square root of x", "square root of x", "root x"),
    ("the square root of two", "square root of two", "root two"),
    # negation
    ("negative x squared", "minus x squared", "the negative of x squared"),
    # inequalities
    ("x is less than y", "x less than y", "x is smaller than y"),
    ("x is greater than y", "x greater than y", "x is bigger than y"),
    ("x is less than or equal to y", "x less than or equal to y",
     "x is at most y"),
    ("x is greater than or equal to y", "x greater than or equal to y",
     "x is at least y"),
    # integrals
    ("the integral from zero to one of x dx",
     "integral from zero to one of x dx",
     "the integral from zero to one of x, dx"),
    ("the integral of x dx", "integral of x dx", "the integral of x, dx"),
    # explicit subscripts
    ("x sub one squared", "x sub one to the second",
     "x sub one to the power of two"),
]

# (utterance, expected latex, expected residual)
ISOLATION_SUITE = [
    ("I was thinking about the integral of e to the negative x squared",
     r"\int e^{-x^2} \, dx", "I was thinking about"),
    ("so anyway x plus one equals two right",
     "x + 1 = 2", "so anyway right"),
    ("maybe we should try x over 3",
     r"\frac{x}{3}", "maybe we should try"),
    ("the derivative of x squared is what I want",
     r"\frac{d}{dx} x^2", "is what I want"),
    ("remember that x squared plus y squared equals z squared okay",
     "x^2 + y^2 = z^2", "remember that okay"),
    ("um the sum from i equals one to n of i squared thanks",
     r"\sum_{i=1}^n i^2", "um thanks"),
    ("could you write pi over two for me",
     r"\frac{\pi}{2}", "could you write for me"),
    ("please write down the quadratic equation",
     "a x^2 + b x + c = 0", "please write down"),
    ("determine the square root of x plus one now",
     r"\sqrt{x} + 1", "determine now"),
    ("okay so two x plus one equals seven",
     "2 x + 1 = 7", "okay so"),
]
