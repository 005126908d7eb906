package org.clinic.owner;

import java.util.List;
import org.springframework.stereotype.Repository;

@Repository
public interface PetRepository {

    List<Pet> findByOwnerId(int ownerId);

    Pet findById(int id);

    void save(Pet pet);
}
