"""Exception hierarchy shared by every module of the package."""


class TreeSlpError(Exception):
    """Base class for all domain errors raised by treeslp."""


# grammar structure

class GrammarError(TreeSlpError):
    """A grammar violates a structural invariant."""

    def __init__(self, message, nonterminal=None):
        super().__init__(message)
        self.nonterminal = nonterminal


class CyclicGrammar(GrammarError):
    def __init__(self, nonterminal):
        super().__init__(f"cyclic grammar: {nonterminal} derives itself", nonterminal)


class MissingProduction(GrammarError):
    def __init__(self, nonterminal):
        super().__init__(f"no production for nonterminal {nonterminal}", nonterminal)


class UnknownNonterminal(GrammarError):
    def __init__(self, nonterminal):
        super().__init__(f"reference to undeclared nonterminal {nonterminal}", nonterminal)


class EmptyProduction(GrammarError):
    def __init__(self, nonterminal):
        super().__init__(f"empty right-hand side for {nonterminal}", nonterminal)


class RankMismatch(GrammarError):
    pass


class ParameterRepeated(GrammarError):
    pass


class ParseError(TreeSlpError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# values and positions

class EmptyValue(TreeSlpError):
    pass


class EmptyInput(TreeSlpError):
    pass


class ExpansionTooLarge(TreeSlpError):
    def __init__(self, length, limit=None):
        msg = f"expansion has length {length}"
        if limit is not None:
            msg += f", limit is {limit}"
        super().__init__(msg)
        self.length = length
        self.limit = limit


class OutOfRange(TreeSlpError, IndexError):
    pass


class NotEnoughOccurrences(TreeSlpError):
    pass


class UndefinedTransition(TreeSlpError):
    def __init__(self, state, symbol):
        super().__init__(f"transducer has no transition from state {state!r} on {symbol}")
        self.state = state
        self.symbol = symbol


class LengthMismatch(TreeSlpError):
    pass


class TooLarge(TreeSlpError):
    pass


# trees and navigation

class NotATree(TreeSlpError):
    pass


class IsRoot(TreeSlpError):
    pass


class NoSuchChild(TreeSlpError):
    pass


class NotAParenthesisOfThatKind(TreeSlpError):
    pass


# evaluation

class DomainViolation(TreeSlpError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class WrongAlphabet(TreeSlpError):
    pass


class InvalidEmbedding(TreeSlpError):
    pass


class NotCaterpillar(TreeSlpError):
    pass


class NotPrime(TreeSlpError):
    pass


class ValueTooLarge(TreeSlpError):
    pass
