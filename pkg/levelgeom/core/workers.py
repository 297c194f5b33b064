import concurrent.futures
import os


class Pool:
    """Maps a function over work items with a chosen execution strategy.

    Results always come back in submission order, whatever the strategy, so
    reductions over chunk results are deterministic.
    """

    def __init__(self, strategy="thread", amount=0):
        assert strategy in ("blocking", "thread", "process"), strategy
        self.strategy = strategy
        self.amount = amount or min(8, os.cpu_count() or 1)

    def map(self, fn, items):
        items = list(items)
        if self.strategy == "blocking" or self.amount == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        if self.strategy == "thread":
            with concurrent.futures.ThreadPoolExecutor(self.amount) as executor:
                return list(executor.map(fn, items))
        return self._process_map(fn, items)

    def _process_map(self, fn, items):
        import cloudpickle
        import multiprocessing

        executor = concurrent.futures.ProcessPoolExecutor(
            max_workers=self.amount,
            mp_context=multiprocessing.get_context("spawn"),
            initializer=_initializer,
            initargs=(cloudpickle.dumps(fn),),
        )
        with executor:
            return list(executor.map(_call, items))


def _initializer(payload):
    global _FN
    import cloudpickle

    _FN = cloudpickle.loads(payload)


def _call(item):
    return _FN(item)
