"""Library predicates written in Prolog and loaded into every engine."""

LIBRARY = r"""
findall(Template, Generator, SolList) :-
    findall_init(Handle),
    (   call(Generator),
        findall_add(Template, Handle),
        fail
    ;   findall_get_solutions(SolList, Handle)
    ).

sharing_findall(Template, Generator, SolList) :-
    current_heap_top(Barrier),
    findall_init(Handle),
    (   call(Generator),
        set_copy_heap_barrier(Barrier),
        findall_add(Template, Handle),
        fail
    ;   set_copy_heap_barrier(Barrier),
        findall_get_solutions(SolList, Handle)
    ).

% the container is updated in place, so it must never be shared
:- mutable container/1.

copy_once_findall(Template, Generator, SolList) :-
    Term = container([]),
    (   call(Generator),
        Term = container(PartialSolList),
        copy_term(Template, Y),
        nb_setarg(1, Term, [Y|PartialSolList]),
        fail
    ;   Term = container(FinalSolList),
        reverse(FinalSolList, SolList)
    ).

reverse(L, R) :- reverse_(L, [], R).
reverse_([], A, A).
reverse_([X|Xs], A, R) :- reverse_(Xs, [X|A], R).

append([], L, L).
append([X|Xs], L, [X|Ys]) :- append(Xs, L, Ys).

member(X, [X|_]).
member(X, [_|T]) :- member(X, T).
"""
