from queueing.tickets import TicketQueue

queue = TicketQueue()
for priority in (1, 2, 3, 2, 1):
    queue.push(priority)
while len(queue):
    queue.pop()
