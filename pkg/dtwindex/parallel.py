from functools import partial
from multiprocessing import Pool


def _indexed(func, item):
    pos, task = item
    return pos, func(task)


def map_tasks(func, tasks, ncpu=1, dask_client=None):
    """
    Apply func to every task on a dask cluster, a local pool or in-process. Results arrive in completion order.

    :param func: picklable function of a single argument
    :param tasks: iterable of task arguments
    :param ncpu: number of processes for local execution
    :param dask_client: reference to a dask client (if omitted single server execution will be performed)
    :return: iterator over (task position, result)
    """
    items = list(enumerate(tasks))
    if dask_client is not None:
        from dask.distributed import as_completed
        nworkers = len(dask_client.scheduler_info()['workers'])
        items = iter(items)
        futures = []
        for i, item in enumerate(items, 1):
            futures.append(dask_client.submit(_indexed, func, item))
            if i == nworkers * 10:
                break
        seq = as_completed(futures, with_results=True)
        for future, (pos, res) in seq:
            yield pos, res
            del future
            try:
                item = next(items)
                seq.add(dask_client.submit(_indexed, func, item))
            except StopIteration:
                continue
    elif ncpu > 1 and len(items) > 1:
        pool = Pool(ncpu)
        try:
            for pos, res in pool.imap_unordered(partial(_indexed, func), items, chunksize=1):
                yield pos, res
        finally:
            pool.close()
            pool.join()
    else:
        for item in items:
            yield _indexed(func, item)


def collect(func, tasks, ncpu=1, dask_client=None):
    """
    Same as map_tasks, but returns the list of results in task order, whatever the execution backend
    """
    results = dict(map_tasks(func, tasks, ncpu=ncpu, dask_client=dask_client))
    return [results[pos] for pos in range(len(results))]


def create_dask_client(hostfile):
    if hostfile is not None:
        from dask.distributed import Client
        with open(hostfile) as f:
            hosts = [line.strip() for line in f if line.strip()]
        dask_client = Client(hosts[0] + ':8786', connection_limit=2048)
    else:
        dask_client = None
    return dask_client
